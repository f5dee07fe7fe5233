#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace digcsi::numeric {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_text(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t seed_tag(std::uint64_t tag) { return tag; }
constexpr std::uint64_t seed_tag(std::string_view tag) { return hash_text(tag); }
constexpr std::uint64_t seed_tag(const char* tag) { return hash_text(tag); }

/// Derives an independent stream seed from a parent seed and a sequence of tags.
/// Every stage of the pipeline seeds itself through this so results do not depend
/// on execution order or parallelism.
template <class... Tags>
constexpr std::uint64_t derive_seed(std::uint64_t seed, Tags... tags) {
  ((seed = mix64(seed ^ mix64(seed_tag(tags)))), ...);
  return mix64(seed);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace digcsi::numeric
