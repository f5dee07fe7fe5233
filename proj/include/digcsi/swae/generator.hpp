#pragma once

#include <filesystem>

#include "digcsi/numeric/batching.hpp"
#include "digcsi/numeric/param_io.hpp"
#include "digcsi/swae/architecture.hpp"

namespace digcsi::swae {

/// A trained decoder as uploaded by one UE.
template <class T>
struct GeneratorArtifact {
  std::uint32_t ue_id = 0;
  SwaeArchitecture arch;
  Network<T> decoder;
  double norm_scale = 1.0;

  std::size_t zdim() const { return arch.zdim; }
  std::uint64_t total_bytes() const { return numeric::parameter_bytes(decoder.params); }
};

template <class T>
GeneratorArtifact<T> make_generator(const Network<T>& decoder, const SwaeArchitecture& arch,
                                    std::uint32_t ue_id, double norm_scale) {
  if (decoder.params.total_scalar_count() != decoder_parameter_count(arch)) {
    throw ShapeError("export_generator: decoder does not match the architecture");
  }
  return {ue_id, arch, decoder, norm_scale};
}

inline nlohmann::json architecture_json(const SwaeArchitecture& arch) {
  return {{"channels", arch.channels}, {"height", arch.height}, {"width", arch.width},
          {"encoder_widths", arch.encoder_widths}, {"decoder_tail", arch.decoder_tail},
          {"zdim", arch.zdim}};
}

inline SwaeArchitecture architecture_from_json(const nlohmann::json& j) {
  SwaeArchitecture a;
  a.channels = j.at("channels");
  a.height = j.at("height");
  a.width = j.at("width");
  a.encoder_widths = j.at("encoder_widths").get<std::vector<std::size_t>>();
  a.decoder_tail = j.at("decoder_tail");
  a.zdim = j.at("zdim");
  return a;
}

/// Writes `<stem>.json` / `<stem>.bin` and returns the blob size.
template <class T>
std::uint64_t export_generator(const std::filesystem::path& stem,
                               const GeneratorArtifact<T>& artifact) {
  nlohmann::json meta = {{"ue_id", artifact.ue_id},
                         {"zdim", artifact.zdim()},
                         {"norm_scale", artifact.norm_scale},
                         {"architecture_id", kArchitectureId},
                         {"architecture", architecture_json(artifact.arch)}};
  numeric::write_parameters(stem, artifact.decoder.params, meta);
  return artifact.total_bytes();
}

template <class T>
GeneratorArtifact<T> read_generator(const std::filesystem::path& stem) {
  nlohmann::json manifest;
  auto params = numeric::read_parameters<T>(stem, &manifest);
  try {
    if (manifest.at("architecture_id") != kArchitectureId) {
      throw ParseError("not a generator file (architecture_id " +
                           manifest.at("architecture_id").dump() + ")",
                       0);
    }
    GeneratorArtifact<T> g;
    g.ue_id = manifest.at("ue_id");
    g.arch = architecture_from_json(manifest.at("architecture"));
    g.norm_scale = manifest.at("norm_scale");
    g.decoder = build_decoder<T>(g.arch, 0);
    numeric::load_values(g.decoder.params, params);
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(numeric::manifest_path(stem).string() + ": " + e.what(), 0);
  }
}

/// Draws K latent vectors from the standard normal prior and decodes them.
/// Output is single precision, shape [K, channels, height, width].
template <class T>
numeric::Tensor<float> generate(GeneratorArtifact<T>& artifact, std::size_t count,
                                std::uint64_t seed, std::size_t batch_size = 64) {
  if (count == 0) throw ArgumentError("generate: K must be >= 1");
  numeric::Rng rng(numeric::derive_seed(seed, "generate"));
  const auto& arch = artifact.arch;
  numeric::Tensor<float> out({count, arch.channels, arch.height, arch.width});
  const std::size_t stride = arch.sample_size();
  for (std::size_t first = 0; first < count; first += batch_size) {
    const std::size_t n = std::min(batch_size, count - first);
    const auto z = numeric::standard_normal<T>({n, arch.zdim}, rng);
    const auto y = artifact.decoder.forward(z);
    std::copy(y.raw(), y.raw() + n * stride, out.raw() + first * stride);
  }
  return out;
}

}  // namespace digcsi::swae
