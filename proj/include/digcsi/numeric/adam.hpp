#pragma once

#include <cmath>

#include "digcsi/numeric/parameters.hpp"

namespace digcsi::numeric {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update. Gradients are zeroed afterwards.
/// Throws DivergenceError before touching any parameter if a gradient is non-finite.
template <class T>
void adam_step(ParameterSet<T>& params, const AdamConfig& cfg) {
  if (!(cfg.lr > 0)) throw ArgumentError("adam: learning rate must be positive");
  for (const auto& e : params.entries()) {
    if (!e.grad.all_finite()) {
      throw DivergenceError("non-finite gradient in parameter '" + e.name + "'");
    }
  }
  params.step_count += 1;
  const double t = static_cast<double>(params.step_count);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T step = static_cast<T>(cfg.lr / correction1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(correction2));
  const T eps = static_cast<T>(cfg.eps);
  for (auto& e : params.entries()) {
    T* w = e.value.raw();
    T* g = e.grad.raw();
    T* m = e.moment1.raw();
    T* v = e.moment2.raw();
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      w[i] -= step * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + eps);
      g[i] = T(0);
    }
  }
}

}  // namespace digcsi::numeric
