#pragma once

#include <cmath>
#include <span>

#include "digcsi/codec/codec.hpp"

namespace digcsi::orchestrator {

inline constexpr double kNmseFloorDb = -100.0;

/// ||H - H_hat||^2 / ||H||^2 over the normalised two-plane representation.
inline double nmse(std::span<const float> reference, std::span<const float> estimate) {
  if (reference.size() != estimate.size()) throw ShapeError("nmse: sample sizes differ");
  double err = 0, ref = 0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double r = reference[i];
    const double d = r - static_cast<double>(estimate[i]);
    err += d * d;
    ref += r * r;
  }
  if (!(ref > 0)) throw MetricError("nmse: reference sample has zero norm");
  return err / ref;
}

/// 10*log10(linear), clamped at the -100 dB floor (so an exact reconstruction reports -100).
inline double to_db(double linear) {
  if (!(linear > 0)) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(linear));
}

/// Mean per-sample NMSE (linear) between two [N, ...] tensors.
inline double mean_nmse(const numeric::Tensor<float>& reference, const numeric::Tensor<float>& estimate) {
  if (reference.shape() != estimate.shape()) throw ShapeError("mean_nmse: shapes differ");
  if (reference.empty() || reference.dim(0) == 0) throw ArgumentError("mean_nmse: empty test set");
  const std::size_t n = reference.dim(0);
  const std::size_t stride = reference.size() / n;
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += nmse(reference.data().subspan(i * stride, stride),
                estimate.data().subspan(i * stride, stride));
  }
  return acc / static_cast<double>(n);
}

struct NmsePair {
  double pnmse_db = 0;
  double gnmse_db = 0;
};

/// PNMSE over the participants' test samples and GNMSE over every UE's.
/// With `identity` set the codec is bypassed (H_hat = H), a debugging aid.
template <class T>
NmsePair evaluate(codec::FeedbackCodec<T>* model, const numeric::Tensor<float>& participant_test,
                  const numeric::Tensor<float>& global_test, bool identity = false) {
  auto score = [&](const numeric::Tensor<float>& set) {
    if (set.empty() || set.dim(0) == 0) throw ArgumentError("evaluate: empty test set");
    if (identity) return to_db(mean_nmse(set, set));
    return to_db(mean_nmse(set, codec::reconstruct_all(*model, set)));
  };
  NmsePair out;
  out.pnmse_db = score(participant_test);
  out.gnmse_db = participant_test == global_test ? out.pnmse_db : score(global_test);
  return out;
}

}  // namespace digcsi::orchestrator
