#pragma once

#include <charconv>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "digcsi/numeric/graph.hpp"

namespace digcsi::codec {

using numeric::Activation;
using numeric::Network;

inline constexpr const char* kArchitectureId = "csinet-v1";

/// Compression ratio num/den, kept in lowest terms.
struct Ratio {
  std::uint32_t num = 1;
  std::uint32_t den = 4;

  double value() const { return static_cast<double>(num) / den; }
  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
  /// Filesystem-safe spelling, e.g. "1-4".
  std::string tag() const { return std::to_string(num) + "-" + std::to_string(den); }

  friend bool operator==(const Ratio&, const Ratio&) = default;
};

inline Ratio parse_ratio(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) throw ConfigError("ratio '" + text + "' is not of the form a/b");
  std::uint32_t num = 0, den = 0;
  const char* b = text.data();
  const auto r1 = std::from_chars(b, b + slash, num);
  const auto r2 = std::from_chars(b + slash + 1, b + text.size(), den);
  if (r1.ec != std::errc{} || r1.ptr != b + slash || r2.ec != std::errc{} ||
      r2.ptr != b + text.size() || num == 0 || den == 0 || num > den) {
    throw ConfigError("ratio '" + text + "' must be a/b with 0 < a <= b");
  }
  const std::uint32_t g = std::gcd(num, den);
  return {num / g, den / g};
}

/// CsiNet-style feedback codec.
///
/// Encoder: 3x3 conv (channels -> channels) + leaky ReLU, flatten, dense to the
/// codeword. Decoder: dense back to the sample size, reshape, `refine_blocks`
/// residual refinement blocks (3x3 convs channels -> w0 -> w1 -> channels with
/// leaky ReLU, additive skip, leaky ReLU after the sum), then a 3x3 conv and tanh.
struct CodecArchitecture {
  std::size_t channels = 2;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t codeword_dim = 512;
  std::vector<std::size_t> refine_widths{8, 16};
  std::size_t refine_blocks = 2;

  std::size_t sample_size() const { return channels * height * width; }

  static CodecArchitecture for_ratio(Ratio ratio, std::size_t channels = 2, std::size_t height = 32,
                                     std::size_t width = 32) {
    CodecArchitecture a;
    a.channels = channels;
    a.height = height;
    a.width = width;
    const std::size_t n = a.sample_size();
    if ((n * ratio.num) % ratio.den != 0) {
      throw ConfigError("ratio " + ratio.str() + " does not divide the sample size " +
                        std::to_string(n));
    }
    a.codeword_dim = n * ratio.num / ratio.den;
    return a;
  }

  void validate() const {
    if (codeword_dim == 0 || channels == 0 || height == 0 || width == 0) {
      throw ConfigError("codec: zero extent");
    }
    for (auto w : refine_widths) {
      if (w == 0) throw ConfigError("codec: refine widths must be positive");
    }
  }
};

template <class T>
Network<T> build_codec_encoder(const CodecArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  numeric::Rng rng(numeric::derive_seed(seed, "codec.encoder.init"));
  Network<T> net;
  numeric::add_conv(net.params, net.graph, "enc.conv", arch.channels, arch.channels, 1, rng);
  net.graph.template emplace<numeric::ActivationLayer<T>>(Activation::leaky_relu);
  net.graph.template emplace<numeric::ReshapeLayer<T>>(numeric::Shape{arch.sample_size()});
  numeric::add_dense(net.params, net.graph, "enc.fc", arch.sample_size(), arch.codeword_dim, rng);
  return net;
}

template <class T>
Network<T> build_codec_decoder(const CodecArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  numeric::Rng rng(numeric::derive_seed(seed, "codec.decoder.init"));
  Network<T> net;
  numeric::add_dense(net.params, net.graph, "dec.fc", arch.codeword_dim, arch.sample_size(), rng);
  net.graph.template emplace<numeric::ReshapeLayer<T>>(
      numeric::Shape{arch.channels, arch.height, arch.width});
  for (std::size_t b = 0; b < arch.refine_blocks; ++b) {
    const std::string prefix = "dec.refine" + std::to_string(b + 1) + ".conv";
    numeric::Sequential<T> body;
    std::size_t cin = arch.channels;
    std::size_t k = 1;
    for (std::size_t w : arch.refine_widths) {
      numeric::add_conv(net.params, body, prefix + std::to_string(k++), cin, w, 1, rng);
      body.template emplace<numeric::ActivationLayer<T>>(Activation::leaky_relu);
      cin = w;
    }
    numeric::add_conv(net.params, body, prefix + std::to_string(k), cin, arch.channels, 1, rng);
    net.graph.template emplace<numeric::ResidualLayer<T>>(std::move(body));
    net.graph.template emplace<numeric::ActivationLayer<T>>(Activation::leaky_relu);
  }
  numeric::add_conv(net.params, net.graph, "dec.out", arch.channels, arch.channels, 1, rng);
  net.graph.template emplace<numeric::ActivationLayer<T>>(Activation::tanh);
  return net;
}

}  // namespace digcsi::codec
