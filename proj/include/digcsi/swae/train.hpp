#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "digcsi/channel/dataset.hpp"
#include "digcsi/numeric/adam.hpp"
#include "digcsi/numeric/batching.hpp"
#include "digcsi/swae/architecture.hpp"
#include "digcsi/swae/swd.hpp"

namespace digcsi::swae {

/// How the per-scalar reconstruction costs of a batch are reduced.
/// per_sample: (1/M) sum_m c(x_m, x_hat_m), c summed over the sample's scalars.
/// per_scalar: mean over every scalar of the batch (plain MSE for squared_l2).
enum class Reduction { per_sample, per_scalar };

inline const char* reduction_name(Reduction r) { return r == Reduction::per_sample ? "per_sample" : "per_scalar"; }

inline Reduction parse_reduction(const std::string& name) {
  if (name == "per_sample") return Reduction::per_sample;
  if (name == "per_scalar") return Reduction::per_scalar;
  throw ConfigError("unknown reconstruction reduction '" + name + "' (expected per_sample or per_scalar)");
}

struct LocalTrainingConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  numeric::AdamConfig adam;
  SwdConfig swd;
  GroundCost reconstruction_cost = GroundCost::squared_l2;
  Reduction reduction = Reduction::per_sample;
};

struct LocalEpochLog {
  std::size_t epoch = 0;
  double reconstruction = 0;  // mean reconstruction term over the epoch, as optimised
  double swd = 0;             // mean sliced Wasserstein term over the epoch
  double mse = 0;             // mean per-scalar squared error over the epoch
};

template <class T>
struct LocalModel {
  Network<T> encoder;
  Network<T> decoder;
  std::vector<LocalEpochLog> log;
  double final_reconstruction = 0;  // MSE on the full train split after training
};

/// Raised when a training loss turns non-finite. Carries the parameters as
/// they were at the start of the failing epoch.
template <class T>
class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const std::string& what, std::vector<numeric::ParameterSet<T>> checkpoint)
      : DivergenceError(what), checkpoint_(std::move(checkpoint)) {}
  const std::vector<numeric::ParameterSet<T>>& checkpoint() const { return checkpoint_; }

 private:
  std::vector<numeric::ParameterSet<T>> checkpoint_;
};

/// Mean reconstruction MSE of `indices` through encoder and decoder.
template <class T>
double reconstruction_mse(LocalModel<T>& model, const numeric::Tensor<float>& samples,
                          const std::vector<std::size_t>& indices, std::size_t batch_size = 64) {
  if (indices.empty()) return 0;
  double weighted = 0;
  for (std::size_t first = 0; first < indices.size(); first += batch_size) {
    const std::size_t n = std::min(batch_size, indices.size() - first);
    const auto x = numeric::gather_batch<T>(samples, {indices.data() + first, n});
    const auto y = model.decoder.forward(model.encoder.forward(x));
    weighted += static_cast<double>(numeric::mse(y, x)) * static_cast<double>(n);
  }
  return weighted / static_cast<double>(indices.size());
}

struct LocalStepLoss {
  double reconstruction = 0;  // reconstruction term as optimised
  double swd = 0;
  double mse = 0;  // per-scalar squared error of the batch, for logs only
  double total(double weight) const { return reconstruction + weight * swd; }
};

/// Reconstruction cost of a batch and its gradient w.r.t. `x_hat`.
template <class T>
std::pair<double, numeric::Tensor<T>> reconstruction_cost(const numeric::Tensor<T>& x_hat,
                                                          const numeric::Tensor<T>& x, GroundCost cost,
                                                          Reduction reduction) {
  numeric::require_shape(x_hat, x.shape(), "reconstruction_cost");
  const std::size_t batch = std::max<std::size_t>(x.dim(0), 1);
  const double denom = reduction == Reduction::per_sample ? static_cast<double>(batch)
                                                          : static_cast<double>(std::max<std::size_t>(x.size(), 1));
  const T scale = static_cast<T>(1.0 / denom);
  numeric::Tensor<T> grad(x.shape());
  double total = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T d = x_hat[i] - x[i];
    if (cost == GroundCost::squared_l2) {
      total += static_cast<double>(d) * static_cast<double>(d);
      grad[i] = T(2) * d * scale;
    } else {
      total += std::abs(static_cast<double>(d));
      grad[i] = d > T(0) ? scale : (d < T(0) ? -scale : T(0));
    }
  }
  return {total / denom, std::move(grad)};
}

/// One forward/backward pass of the local objective on batch `x` with prior
/// draws `z` and slicing directions `dirs`. Gradients are accumulated into
/// both networks; no optimiser step is taken.
template <class T>
LocalStepLoss accumulate_local_gradients(LocalModel<T>& model, const numeric::Tensor<T>& x,
                                         const numeric::Tensor<T>& z, const numeric::Tensor<T>& dirs,
                                         const LocalTrainingConfig& config) {
  const auto s = model.encoder.forward(x);
  const SwdBatch<T> batch{s, z, dirs};
  const auto x_hat = model.decoder.forward(s);
  auto [rec, grad_x_hat] = reconstruction_cost(x_hat, x, config.reconstruction_cost, config.reduction);
  const auto swd = sliced_wasserstein(batch, config.swd.cost);
  const T weight = static_cast<T>(config.swd.weight);
  auto grad_s = model.decoder.backward(grad_x_hat);
  for (std::size_t i = 0; i < grad_s.size(); ++i) grad_s[i] += weight * swd.grad_latent[i];
  model.encoder.backward(grad_s);
  return {rec, static_cast<double>(swd.value), static_cast<double>(numeric::mse(x_hat, x))};
}

/// Trains one UE's autoencoder on its train split. Each step minimises
/// rec(x, decoder(encoder(x))) + weight * SWD(encoder(x), z) with z drawn from
/// the standard normal prior and fresh slicing directions.
template <class T>
LocalModel<T> train_local(const channel::LocalDataset& data, const SwaeArchitecture& arch,
                          const LocalTrainingConfig& config, std::uint64_t seed) {
  arch.validate();
  config.swd.validate();
  if (data.train.empty()) throw ArgumentError("train_local: empty train split");
  if (config.batch_size == 0 || config.batch_size > data.train.size()) {
    throw ArgumentError("train_local: batch size " + std::to_string(config.batch_size) +
                        " must be in [1, " + std::to_string(data.train.size()) + "]");
  }
  if (data.sample_size() != arch.sample_size()) {
    throw ShapeError("train_local: dataset samples do not match the architecture");
  }

  LocalModel<T> model{build_encoder<T>(arch, seed), build_decoder<T>(arch, seed), {}, 0};
  numeric::Rng rng(numeric::derive_seed(seed, "swae.train"));

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<numeric::ParameterSet<T>> checkpoint{model.encoder.params, model.decoder.params};
    double rec_sum = 0, swd_sum = 0, mse_sum = 0;
    const auto batches = numeric::epoch_batches(data.train, config.batch_size, rng);
    for (const auto& idx : batches) {
      const auto x = numeric::gather_batch<T>(data.samples, idx);
      const auto z = numeric::standard_normal<T>({x.dim(0), arch.zdim}, rng);
      const auto dirs = sample_directions<T>(arch.zdim, config.swd.directions, rng);
      const auto step = accumulate_local_gradients(model, x, z, dirs, config);
      if (!std::isfinite(step.reconstruction) || !std::isfinite(step.swd)) {
        throw TrainingDiverged<T>("local training diverged at epoch " + std::to_string(epoch) +
                                      " (reconstruction " + std::to_string(step.reconstruction) +
                                      ", swd " + std::to_string(step.swd) + ")",
                                  std::move(checkpoint));
      }
      try {
        numeric::adam_step(model.encoder.params, config.adam);
        numeric::adam_step(model.decoder.params, config.adam);
      } catch (const DivergenceError& e) {
        throw TrainingDiverged<T>(e.what(), std::move(checkpoint));
      }
      rec_sum += step.reconstruction;
      swd_sum += step.swd;
      mse_sum += step.mse;
    }
    const auto nb = static_cast<double>(batches.size());
    model.log.push_back({epoch, rec_sum / nb, swd_sum / nb, mse_sum / nb});
  }
  model.final_reconstruction = reconstruction_mse(model, data.samples, data.train);
  return model;
}

}  // namespace digcsi::swae
