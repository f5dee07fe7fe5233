#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "digcsi/numeric/rng.hpp"
#include "digcsi/numeric/tensor.hpp"

namespace digcsi::numeric {

template <class T>
struct ParameterEntry {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> moment1;
  Tensor<T> moment2;
};

/// Named, ordered collection of trainable tensors plus their Adam state.
template <class T>
class ParameterSet {
 public:
  /// Registers a zero-initialised entry and returns its index.
  std::size_t add(const std::string& name, const Shape& shape) {
    if (index_.contains(name)) throw ArgumentError("duplicate parameter name: " + name);
    index_.emplace(name, entries_.size());
    entries_.push_back({name, Tensor<T>(shape), Tensor<T>(shape), Tensor<T>(shape), Tensor<T>(shape)});
    return entries_.size() - 1;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  ParameterEntry<T>& operator[](std::size_t i) { return entries_[i]; }
  const ParameterEntry<T>& operator[](std::size_t i) const { return entries_[i]; }
  std::vector<ParameterEntry<T>>& entries() noexcept { return entries_; }
  const std::vector<ParameterEntry<T>>& entries() const noexcept { return entries_; }

  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ArgumentError("unknown parameter: " + name);
    return it->second;
  }

  std::size_t total_scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  std::uint64_t step_count = 0;

  void zero_grad() {
    for (auto& e : entries_) e.grad.fill(T(0));
  }

  /// Parameter values only; gradients and optimiser state are not compared.
  bool same_values(const ParameterSet& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].name != other.entries_[i].name ||
          !(entries_[i].value == other.entries_[i].value)) {
        return false;
      }
    }
    return true;
  }

  template <class U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& e : entries_) {
      const std::size_t i = out.add(e.name, e.value.shape());
      out[i].value = e.value.template cast<U>();
    }
    out.step_count = step_count;
    return out;
  }

 private:
  std::vector<ParameterEntry<T>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Kaiming-uniform initialisation for a leaky-ReLU network.
template <class T>
void kaiming_uniform(Tensor<T>& t, double fan_in, Rng& rng) {
  const double gain = std::sqrt(2.0 / (1.0 + 0.2 * 0.2));
  const double bound = gain * std::sqrt(3.0 / fan_in);
  for (T& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace digcsi::numeric
