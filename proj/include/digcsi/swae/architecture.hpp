#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "digcsi/numeric/graph.hpp"

namespace digcsi::swae {

using numeric::Activation;
using numeric::Network;

inline constexpr const char* kArchitectureId = "swae-v1";

/// Convolutional autoencoder used as the per-UE generator.
///
/// Encoder: one stride-2 3x3 conv + leaky ReLU per entry of `encoder_widths`,
/// flatten, dense to `zdim`. Decoder mirrors it with stride-2 transpose convs
/// (widths reversed, ending at `decoder_tail`), then a stride-1 conv back to
/// `channels` and tanh. The defaults map 2x32x32 -> 256x2x2 -> zdim.
struct SwaeArchitecture {
  std::size_t channels = 2;
  std::size_t height = 32;
  std::size_t width = 32;
  std::vector<std::size_t> encoder_widths{32, 64, 128, 256};
  std::size_t decoder_tail = 16;
  std::size_t zdim = 100;

  std::size_t stages() const { return encoder_widths.size(); }
  std::size_t bottleneck_height() const { return height >> stages(); }
  std::size_t bottleneck_width() const { return width >> stages(); }
  std::size_t bottleneck_size() const {
    return encoder_widths.back() * bottleneck_height() * bottleneck_width();
  }
  std::size_t sample_size() const { return channels * height * width; }

  /// Output widths of the transpose convolutions, in order.
  std::vector<std::size_t> decoder_widths() const {
    std::vector<std::size_t> out;
    for (std::size_t i = stages() - 1; i-- > 0;) out.push_back(encoder_widths[i]);
    out.push_back(decoder_tail);
    return out;
  }

  void validate() const {
    if (encoder_widths.empty()) throw ConfigError("swae: at least one encoder stage is required");
    if (zdim == 0 || channels == 0 || decoder_tail == 0) throw ConfigError("swae: zero extent");
    const std::size_t scale = std::size_t{1} << stages();
    if (height % scale != 0 || width % scale != 0 || height < scale || width < scale) {
      throw ConfigError("swae: spatial extent " + std::to_string(height) + "x" +
                        std::to_string(width) + " is not divisible by 2^" +
                        std::to_string(stages()));
    }
  }
};

/// Closed-form decoder scalar count; 1024*zdim + 1024 + 392,210 at the defaults.
inline std::size_t decoder_parameter_count(const SwaeArchitecture& arch) {
  using numeric::kTaps;
  const std::size_t flat = arch.bottleneck_size();
  std::size_t n = arch.zdim * flat + flat;
  std::size_t cin = arch.encoder_widths.back();
  for (std::size_t cout : arch.decoder_widths()) {
    n += cin * cout * kTaps + cout;
    cin = cout;
  }
  n += cin * arch.channels * kTaps + arch.channels;
  return n;
}

inline std::size_t encoder_parameter_count(const SwaeArchitecture& arch) {
  using numeric::kTaps;
  std::size_t n = 0;
  std::size_t cin = arch.channels;
  for (std::size_t cout : arch.encoder_widths) {
    n += cin * cout * kTaps + cout;
    cin = cout;
  }
  return n + arch.bottleneck_size() * arch.zdim + arch.zdim;
}

template <class T>
Network<T> build_encoder(const SwaeArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  numeric::Rng rng(numeric::derive_seed(seed, "swae.encoder.init"));
  Network<T> net;
  std::size_t cin = arch.channels;
  for (std::size_t i = 0; i < arch.stages(); ++i) {
    const std::size_t cout = arch.encoder_widths[i];
    numeric::add_conv(net.params, net.graph, "enc.conv" + std::to_string(i + 1), cin, cout, 2, rng);
    net.graph.template emplace<numeric::ActivationLayer<T>>(Activation::leaky_relu);
    cin = cout;
  }
  net.graph.template emplace<numeric::ReshapeLayer<T>>(numeric::Shape{arch.bottleneck_size()});
  numeric::add_dense(net.params, net.graph, "enc.fc", arch.bottleneck_size(), arch.zdim, rng);
  return net;
}

template <class T>
Network<T> build_decoder(const SwaeArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  numeric::Rng rng(numeric::derive_seed(seed, "swae.decoder.init"));
  Network<T> net;
  numeric::add_dense(net.params, net.graph, "dec.fc", arch.zdim, arch.bottleneck_size(), rng);
  net.graph.template emplace<numeric::ActivationLayer<T>>(Activation::leaky_relu);
  net.graph.template emplace<numeric::ReshapeLayer<T>>(numeric::Shape{
      arch.encoder_widths.back(), arch.bottleneck_height(), arch.bottleneck_width()});
  std::size_t cin = arch.encoder_widths.back();
  std::size_t k = 1;
  for (std::size_t cout : arch.decoder_widths()) {
    numeric::add_tconv(net.params, net.graph, "dec.tconv" + std::to_string(k++), cin, cout, rng);
    net.graph.template emplace<numeric::ActivationLayer<T>>(Activation::leaky_relu);
    cin = cout;
  }
  numeric::add_conv(net.params, net.graph, "dec.out", cin, arch.channels, 1, rng);
  net.graph.template emplace<numeric::ActivationLayer<T>>(Activation::tanh);
  return net;
}

}  // namespace digcsi::swae
