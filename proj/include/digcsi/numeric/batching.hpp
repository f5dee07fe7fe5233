#pragma once

#include <algorithm>
#include <vector>

#include "digcsi/numeric/rng.hpp"
#include "digcsi/numeric/tensor.hpp"

namespace digcsi::numeric {

/// Gathers rows `indices` of a float sample tensor into a batch of precision T.
template <class T>
Tensor<T> gather_batch(const Tensor<float>& samples, std::span<const std::size_t> indices) {
  Shape shape = samples.shape();
  const std::size_t stride = samples.size() / shape[0];
  shape[0] = indices.size();
  Tensor<T> out(shape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const float* src = samples.raw() + indices[i] * stride;
    std::copy(src, src + stride, out.raw() + i * stride);
  }
  return out;
}

/// Shuffled mini-batches over `pool`; the final batch may be short.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::vector<std::size_t> pool,
                                                           std::size_t batch_size, Rng& rng) {
  for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t first = 0; first < pool.size(); first += batch_size) {
    const std::size_t last = std::min(pool.size(), first + batch_size);
    out.emplace_back(pool.begin() + static_cast<std::ptrdiff_t>(first),
                     pool.begin() + static_cast<std::ptrdiff_t>(last));
  }
  return out;
}

template <class T>
Tensor<T> standard_normal(const Shape& shape, Rng& rng) {
  Tensor<T> out(shape);
  for (T& v : out.data()) v = static_cast<T>(rng.normal());
  return out;
}

}  // namespace digcsi::numeric
