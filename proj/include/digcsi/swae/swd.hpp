#pragma once

// Sliced Wasserstein distance between a batch of latent codes and a batch of
// prior samples: project both onto L unit directions, sort each projection,
// pair by rank and average the ground cost over all L*M pairs.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "digcsi/numeric/rng.hpp"
#include "digcsi/numeric/tensor.hpp"

namespace digcsi::swae {

using numeric::Tensor;

enum class GroundCost { squared_l2, l1 };

inline const char* ground_cost_name(GroundCost c) {
  return c == GroundCost::squared_l2 ? "squared_l2" : "l1";
}

inline GroundCost parse_ground_cost(const std::string& name) {
  if (name == "squared_l2") return GroundCost::squared_l2;
  if (name == "l1") return GroundCost::l1;
  throw ConfigError("unknown ground cost '" + name + "' (expected squared_l2 or l1)");
}

struct SwdConfig {
  std::size_t directions = 50;
  GroundCost cost = GroundCost::squared_l2;
  double weight = 1.0;

  void validate() const {
    if (directions == 0) throw ConfigError("swd: at least one direction is required");
    if (!(weight >= 0) || !std::isfinite(weight)) throw ConfigError("swd: weight must be >= 0");
  }
};

/// L directions drawn uniformly on the unit sphere in R^zdim, shape [L, zdim].
template <class T>
Tensor<T> sample_directions(std::size_t zdim, std::size_t count, numeric::Rng& rng) {
  if (zdim == 0 || count == 0) throw ArgumentError("sample_directions: zdim and L must be >= 1");
  Tensor<T> dirs({count, zdim});
  std::vector<double> v(zdim);
  for (std::size_t l = 0; l < count; ++l) {
    double norm2 = 0;
    do {
      norm2 = 0;
      for (double& x : v) {
        x = rng.normal();
        norm2 += x * x;
      }
    } while (norm2 == 0);
    const double norm = std::sqrt(norm2);
    for (std::size_t d = 0; d < zdim; ++d) dirs[l * zdim + d] = static_cast<T>(v[d] / norm);
  }
  return dirs;
}

/// Latent batch, prior batch and slicing directions for one estimate.
template <class T>
struct SwdBatch {
  Tensor<T> latent;      // [M, zdim]
  Tensor<T> prior;       // [M, zdim]
  Tensor<T> directions;  // [L, zdim]

  void validate() const {
    numeric::require_rank(latent, 2, "swd latent");
    numeric::require_rank(prior, 2, "swd prior");
    numeric::require_rank(directions, 2, "swd directions");
    if (latent.dim(0) == 0) throw ArgumentError("sliced_wasserstein: empty batch (M = 0)");
    if (latent.shape() != prior.shape()) {
      throw ShapeError("sliced_wasserstein: latent " + numeric::shape_string(latent.shape()) +
                       " and prior " + numeric::shape_string(prior.shape()) + " differ");
    }
    if (directions.dim(1) != latent.dim(1)) {
      throw ShapeError("sliced_wasserstein: direction dimension does not match zdim");
    }
    if (directions.dim(0) == 0) throw ArgumentError("sliced_wasserstein: no directions");
  }
};

template <class T>
struct SwdResult {
  T value = 0;
  Tensor<T> grad_latent;  // d value / d latent, shape [M, zdim]
};

namespace detail {

// [M, L] projections, one dot product per entry so each row's projection does
// not depend on where the row sits in the batch.
template <class T>
std::vector<T> project(const Tensor<T>& points, const Tensor<T>& dirs) {
  const std::size_t m = points.dim(0), zdim = points.dim(1), l = dirs.dim(0);
  std::vector<T> out(m * l);
  for (std::size_t i = 0; i < m; ++i) {
    const T* p = points.raw() + i * zdim;
    for (std::size_t k = 0; k < l; ++k) {
      const T* d = dirs.raw() + k * zdim;
      T acc = 0;
      for (std::size_t j = 0; j < zdim; ++j) acc += p[j] * d[j];
      out[i * l + k] = acc;
    }
  }
  return out;
}

template <class T>
std::vector<std::size_t> rank_order(const std::vector<T>& proj, std::size_t m, std::size_t l,
                                    std::size_t k) {
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return proj[a * l + k] < proj[b * l + k]; });
  return idx;
}

}  // namespace detail

/// Value and gradient with respect to the latent batch. The sort permutation
/// is treated as constant at the evaluation point; ties keep batch order.
template <class T>
SwdResult<T> sliced_wasserstein(const SwdBatch<T>& batch, GroundCost cost) {
  batch.validate();
  const std::size_t m = batch.latent.dim(0), zdim = batch.latent.dim(1);
  const std::size_t l = batch.directions.dim(0);
  const auto ps = detail::project(batch.latent, batch.directions);
  const auto pz = detail::project(batch.prior, batch.directions);

  // gradient w.r.t. each projection, [M, L]
  std::vector<T> gproj(m * l, T(0));
  double total = 0;
  const double norm = 1.0 / (static_cast<double>(l) * static_cast<double>(m));
  for (std::size_t k = 0; k < l; ++k) {
    const auto os = detail::rank_order(ps, m, l, k);
    const auto oz = detail::rank_order(pz, m, l, k);
    for (std::size_t r = 0; r < m; ++r) {
      const double diff = static_cast<double>(ps[os[r] * l + k]) - static_cast<double>(pz[oz[r] * l + k]);
      double g;
      if (cost == GroundCost::squared_l2) {
        total += diff * diff;
        g = 2.0 * diff;
      } else {
        total += std::abs(diff);
        g = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
      }
      gproj[os[r] * l + k] = static_cast<T>(g * norm);
    }
  }

  SwdResult<T> out;
  out.value = static_cast<T>(total * norm);
  out.grad_latent = Tensor<T>({m, zdim});
  for (std::size_t i = 0; i < m; ++i) {
    T* g = out.grad_latent.raw() + i * zdim;
    for (std::size_t k = 0; k < l; ++k) {
      const T coeff = gproj[i * l + k];
      if (coeff == T(0)) continue;
      const T* d = batch.directions.raw() + k * zdim;
      for (std::size_t j = 0; j < zdim; ++j) g[j] += coeff * d[j];
    }
  }
  return out;
}

}  // namespace digcsi::swae
