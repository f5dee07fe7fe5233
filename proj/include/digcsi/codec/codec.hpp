#pragma once

#include <cmath>
#include <filesystem>
#include <vector>

#include "digcsi/codec/architecture.hpp"
#include "digcsi/numeric/adam.hpp"
#include "digcsi/numeric/batching.hpp"
#include "digcsi/numeric/param_io.hpp"

namespace digcsi::codec {

template <class T>
struct FeedbackCodec {
  CodecArchitecture arch;
  Network<T> encoder;
  Network<T> decoder;

  static FeedbackCodec create(const CodecArchitecture& arch, std::uint64_t seed) {
    return {arch, build_codec_encoder<T>(arch, seed), build_codec_decoder<T>(arch, seed)};
  }

  /// [B, C, H, W] -> [B, codeword_dim]
  numeric::Tensor<T> encode(const numeric::Tensor<T>& samples) {
    numeric::require_rank(samples, 4, "codec encode");
    if (samples.dim(1) != arch.channels || samples.dim(2) != arch.height ||
        samples.dim(3) != arch.width) {
      throw ShapeError("codec encode: sample shape " + numeric::shape_string(samples.shape()) +
                       " does not match the " + std::to_string(arch.channels) + "x" +
                       std::to_string(arch.height) + "x" + std::to_string(arch.width) +
                       " architecture");
    }
    return encoder.forward(samples);
  }

  /// [B, codeword_dim] -> [B, C, H, W]
  numeric::Tensor<T> decode(const numeric::Tensor<T>& codewords) {
    numeric::require_rank(codewords, 2, "codec decode");
    if (codewords.dim(1) != arch.codeword_dim) {
      throw ShapeError("codec decode: codeword length " + std::to_string(codewords.dim(1)) +
                       " does not match " + std::to_string(arch.codeword_dim));
    }
    return decoder.forward(codewords);
  }

  numeric::Tensor<T> reconstruct(const numeric::Tensor<T>& samples) {
    return decode(encode(samples));
  }
};

struct CodecTrainingConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  numeric::AdamConfig adam;
};

struct CodecEpochLog {
  std::size_t epoch = 0;
  double loss = 0;  // mean batch MSE
};

template <class T>
class CodecDiverged : public DivergenceError {
 public:
  CodecDiverged(const std::string& what, FeedbackCodec<T> checkpoint)
      : DivergenceError(what), checkpoint_(std::move(checkpoint)) {}
  const FeedbackCodec<T>& checkpoint() const { return checkpoint_; }

 private:
  FeedbackCodec<T> checkpoint_;
};

template <class T>
struct TrainedCodec {
  FeedbackCodec<T> codec;
  std::vector<CodecEpochLog> log;
};

/// Minimises mse(x, decode(encode(x))) over `samples` ([N, C, H, W]) with Adam.
template <class T>
TrainedCodec<T> train_codec(const numeric::Tensor<float>& samples, const CodecArchitecture& arch,
                            const CodecTrainingConfig& config, std::uint64_t seed) {
  if (samples.empty() || samples.dim(0) == 0) throw ArgumentError("train_codec: empty dataset");
  if (config.batch_size == 0) throw ArgumentError("train_codec: batch size must be positive");
  TrainedCodec<T> out{FeedbackCodec<T>::create(arch, seed), {}};
  auto& codec = out.codec;
  numeric::Rng rng(numeric::derive_seed(seed, "codec.train"));
  std::vector<std::size_t> pool(samples.dim(0));
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    FeedbackCodec<T> checkpoint = codec;
    double loss_sum = 0;
    const auto batches = numeric::epoch_batches(pool, config.batch_size, rng);
    for (const auto& idx : batches) {
      const auto x = numeric::gather_batch<T>(samples, idx);
      const auto y = codec.reconstruct(x);
      const T loss = numeric::mse(y, x);
      if (!std::isfinite(static_cast<double>(loss))) {
        throw CodecDiverged<T>("codec training diverged at epoch " + std::to_string(epoch),
                               std::move(checkpoint));
      }
      codec.encoder.backward(codec.decoder.backward(numeric::mse_grad(y, x)));
      try {
        numeric::adam_step(codec.encoder.params, config.adam);
        numeric::adam_step(codec.decoder.params, config.adam);
      } catch (const DivergenceError& e) {
        throw CodecDiverged<T>(e.what(), std::move(checkpoint));
      }
      loss_sum += loss;
    }
    out.log.push_back({epoch, loss_sum / static_cast<double>(batches.size())});
  }
  return out;
}

/// Reconstructs every sample of `samples` in fixed-size batches; output is float.
template <class T>
numeric::Tensor<float> reconstruct_all(FeedbackCodec<T>& codec, const numeric::Tensor<float>& samples,
                                       std::size_t batch_size = 128) {
  numeric::Tensor<float> out(samples.shape());
  const std::size_t n = samples.dim(0);
  const std::size_t stride = samples.size() / std::max<std::size_t>(n, 1);
  std::vector<std::size_t> idx;
  for (std::size_t first = 0; first < n; first += batch_size) {
    const std::size_t count = std::min(batch_size, n - first);
    idx.resize(count);
    std::iota(idx.begin(), idx.end(), first);
    const auto y = codec.reconstruct(numeric::gather_batch<T>(samples, idx));
    std::copy(y.raw(), y.raw() + count * stride, out.raw() + first * stride);
  }
  return out;
}

// Codec files: parameter pair with both halves in one set, prefixed by role.

template <class T>
void write_codec(const std::filesystem::path& stem, const FeedbackCodec<T>& codec, Ratio ratio,
                 const nlohmann::json& extra = nlohmann::json::object()) {
  numeric::ParameterSet<T> joined;
  for (const auto* part : {&codec.encoder.params, &codec.decoder.params}) {
    for (const auto& e : part->entries()) joined[joined.add(e.name, e.value.shape())].value = e.value;
  }
  nlohmann::json meta = extra;
  meta["architecture_id"] = kArchitectureId;
  meta["compression_ratio"] = ratio.str();
  meta["codeword_dim"] = codec.arch.codeword_dim;
  meta["sample_shape"] = {codec.arch.channels, codec.arch.height, codec.arch.width};
  meta["refine_widths"] = codec.arch.refine_widths;
  meta["refine_blocks"] = codec.arch.refine_blocks;
  numeric::write_parameters(stem, joined, meta);
}

template <class T>
FeedbackCodec<T> read_codec(const std::filesystem::path& stem) {
  nlohmann::json manifest;
  const auto params = numeric::read_parameters<T>(stem, &manifest);
  try {
    if (manifest.at("architecture_id") != kArchitectureId) {
      throw ParseError("not a codec file", 0);
    }
    CodecArchitecture arch;
    const auto shape = manifest.at("sample_shape").get<std::vector<std::size_t>>();
    if (shape.size() != 3) throw ParseError("sample_shape must have three extents", 0);
    arch.channels = shape[0];
    arch.height = shape[1];
    arch.width = shape[2];
    arch.codeword_dim = manifest.at("codeword_dim");
    arch.refine_widths = manifest.at("refine_widths").get<std::vector<std::size_t>>();
    arch.refine_blocks = manifest.at("refine_blocks");
    auto codec = FeedbackCodec<T>::create(arch, 0);
    if (params.size() != codec.encoder.params.size() + codec.decoder.params.size()) {
      throw ShapeError("codec file entry count does not match the architecture");
    }
    for (const auto& e : params.entries()) {
      auto& target = e.name.starts_with("enc.") ? codec.encoder.params : codec.decoder.params;
      auto& dst = target[target.index_of(e.name)];
      if (dst.value.shape() != e.value.shape()) {
        throw ShapeError("codec parameter '" + e.name + "' has the wrong shape");
      }
      dst.value = e.value;
    }
    return codec;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(numeric::manifest_path(stem).string() + ": " + e.what(), 0);
  }
}

}  // namespace digcsi::codec
