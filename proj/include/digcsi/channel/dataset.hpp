#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "digcsi/channel/dft.hpp"
#include "digcsi/channel/scenario.hpp"
#include "digcsi/numeric/tensor.hpp"

namespace digcsi::channel {

/// Normalised angular-delay samples of one UE, shape [count, 2, N_f, N_t],
/// plane 0 = real part, plane 1 = imaginary part, every scalar in [-1, 1].
struct LocalDataset {
  std::uint32_t ue_id = 0;
  numeric::Tensor<float> samples;
  double norm_scale = 1.0;
  std::uint64_t split_seed = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;

  std::size_t count() const { return samples.empty() ? 0 : samples.dim(0); }
  std::size_t subcarriers() const { return samples.dim(2); }
  std::size_t antennas() const { return samples.dim(3); }
  std::size_t sample_size() const { return samples.size() / std::max<std::size_t>(count(), 1); }
};

inline std::size_t test_count_for(std::size_t count) {
  if (count < 2) return 0;
  return std::max<std::size_t>(1, count / 10);
}

inline void fisher_yates(std::vector<std::size_t>& v, numeric::Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

/// Deterministic 90/10 split; both index lists come back sorted.
inline void assign_split(LocalDataset& ds) {
  std::vector<std::size_t> order(ds.count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  numeric::Rng rng(ds.split_seed);
  fisher_yates(order, rng);
  const std::size_t n_test = test_count_for(order.size());
  ds.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  ds.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(ds.test.begin(), ds.test.end());
  std::sort(ds.train.begin(), ds.train.end());
}

/// Gathers the listed samples into a new [n, 2, N_f, N_t] tensor.
inline numeric::Tensor<float> gather(const numeric::Tensor<float>& samples,
                                     const std::vector<std::size_t>& indices) {
  numeric::Shape shape = samples.shape();
  const std::size_t stride = samples.size() / shape[0];
  shape[0] = indices.size();
  std::vector<float> out(indices.size() * stride);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(samples.raw() + indices[i] * stride, stride, out.data() + i * stride);
  }
  return numeric::Tensor<float>(std::move(shape), std::move(out));
}

/// Concatenates sample tensors along the leading axis.
inline numeric::Tensor<float> concat(const std::vector<const numeric::Tensor<float>*>& parts) {
  if (parts.empty()) throw ArgumentError("concat: nothing to concatenate");
  numeric::Shape shape = parts.front()->shape();
  std::vector<float> out;
  std::size_t rows = 0;
  for (const auto* p : parts) {
    if (p->rank() != shape.size() ||
        !std::equal(shape.begin() + 1, shape.end(), p->shape().begin() + 1)) {
      throw ShapeError("concat: per-sample shapes differ");
    }
    out.insert(out.end(), p->data().begin(), p->data().end());
    rows += p->dim(0);
  }
  shape[0] = rows;
  return numeric::Tensor<float>(std::move(shape), std::move(out));
}

/// Divides by the dataset-wide peak |Re|/|Im| and splits into real/imag planes.
inline LocalDataset normalize_samples(std::uint32_t ue_id,
                                      const std::vector<ComplexMatrix>& angular_delay,
                                      std::uint64_t split_seed) {
  if (angular_delay.empty()) throw GenerationError("dataset has no snapshots");
  const auto nf = static_cast<std::size_t>(angular_delay.front().rows());
  const auto nt = static_cast<std::size_t>(angular_delay.front().cols());
  double peak = 0;
  for (const auto& m : angular_delay) {
    peak = std::max({peak, m.real().cwiseAbs().maxCoeff(), m.imag().cwiseAbs().maxCoeff()});
  }
  if (!(peak > 0) || !std::isfinite(peak)) {
    throw GenerationError("degenerate dataset for UE " + std::to_string(ue_id) +
                          ": peak magnitude is " + std::to_string(peak));
  }
  LocalDataset ds;
  ds.ue_id = ue_id;
  ds.norm_scale = peak;
  ds.split_seed = split_seed;
  ds.samples = numeric::Tensor<float>({angular_delay.size(), 2, nf, nt});
  float* out = ds.samples.raw();
  for (const auto& m : angular_delay) {
    for (int plane = 0; plane < 2; ++plane) {
      for (std::size_t r = 0; r < nf; ++r) {
        for (std::size_t c = 0; c < nt; ++c) {
          const Complex v = m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
          *out++ = static_cast<float>((plane == 0 ? v.real() : v.imag()) / peak);
        }
      }
    }
  }
  assign_split(ds);
  return ds;
}

/// Walks the UE through its box and records one normalised angular-delay
/// sample per snapshot.
inline LocalDataset build_local_dataset(const UeGeometry& ue, const ScenarioConfig& config) {
  config.validate();
  const std::uint64_t seed = ue_seed(config, ue.ue_id);
  const auto walk = random_walk(config, ue.center, numeric::derive_seed(seed, "walk"));
  const DftPair dft(config.subcarriers, config.antennas);
  std::vector<ComplexMatrix> ad;
  ad.reserve(walk.size());
  for (const Point& p : walk) {
    ad.push_back(to_angular_delay(synthesize_channel(ue, p, config).matrix, dft));
  }
  return normalize_samples(ue.ue_id, ad, numeric::derive_seed(seed, "split"));
}

}  // namespace digcsi::channel
