#pragma once

// Dataset container:
//   "DIGC" | u16 version=1 | u32 ue_id | u32 count | u16 N_f | u16 N_t |
//   f64 norm_scale | u64 split_seed | count * 2 * N_f * N_t f32 (plane-major)
// All fields little-endian. A JSON sidecar (<file>.json) repeats the header.

#include "json.hpp"

#include <filesystem>

#include "digcsi/channel/dataset.hpp"
#include "digcsi/io/binary.hpp"

namespace digcsi::channel {

inline constexpr char kDatasetMagic[4] = {'D', 'I', 'G', 'C'};
inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 4 + 2 + 4 + 4 + 2 + 2 + 8 + 8;

/// Payload bytes of `count` single-precision samples of the given extents.
constexpr std::uint64_t dataset_payload_bytes(std::uint64_t count, std::uint64_t subcarriers = 32,
                                              std::uint64_t antennas = 32) {
  return count * 2 * subcarriers * antennas * sizeof(float);
}

inline std::vector<unsigned char> encode_dataset(const LocalDataset& ds) {
  io::ByteWriter w;
  w.put_bytes({kDatasetMagic, 4});
  w.put<std::uint16_t>(kDatasetVersion);
  w.put<std::uint32_t>(ds.ue_id);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.count()));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(ds.subcarriers()));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(ds.antennas()));
  w.put<double>(ds.norm_scale);
  w.put<std::uint64_t>(ds.split_seed);
  w.put_all(ds.samples.data());
  return w.bytes();
}

inline LocalDataset decode_dataset(std::span<const unsigned char> bytes) {
  io::ByteReader r(bytes);
  if (r.get_bytes(4, "magic") != std::string_view(kDatasetMagic, 4)) {
    throw ParseError("bad dataset magic", 0);
  }
  const std::size_t version_at = r.offset();
  const auto version = r.get<std::uint16_t>("version");
  if (version != kDatasetVersion) {
    throw ParseError("unsupported dataset version " + std::to_string(version), version_at);
  }
  LocalDataset ds;
  ds.ue_id = r.get<std::uint32_t>("ue_id");
  const auto count = r.get<std::uint32_t>("sample count");
  const auto nf = r.get<std::uint16_t>("N_f");
  const auto nt = r.get<std::uint16_t>("N_t");
  const std::size_t scale_at = r.offset();
  ds.norm_scale = r.get<double>("norm_scale");
  if (!(ds.norm_scale > 0) || !std::isfinite(ds.norm_scale)) {
    throw ParseError("norm_scale must be positive and finite", scale_at);
  }
  ds.split_seed = r.get<std::uint64_t>("split seed");
  ds.samples = numeric::Tensor<float>({count, 2, nf, nt});
  r.get_all(ds.samples.data(), "samples");
  if (r.remaining() != 0) {
    throw ParseError(std::to_string(r.remaining()) + " trailing bytes after samples", r.offset());
  }
  assign_split(ds);
  return ds;
}

inline nlohmann::json dataset_manifest(const LocalDataset& ds) {
  return {{"format", "DIGC"},
          {"version", kDatasetVersion},
          {"ue_id", ds.ue_id},
          {"sample_count", ds.count()},
          {"subcarriers", ds.subcarriers()},
          {"antennas", ds.antennas()},
          {"norm_scale", ds.norm_scale},
          {"split_seed", ds.split_seed},
          {"train_count", ds.train.size()},
          {"test_count", ds.test.size()},
          {"payload_bytes", ds.samples.size() * sizeof(float)}};
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& file) {
  return std::filesystem::path(file.string() + ".json");
}

inline void write_dataset(const std::filesystem::path& path, const LocalDataset& ds) {
  io::write_file(path, encode_dataset(ds));
  io::write_text(sidecar_path(path), dataset_manifest(ds).dump(2) + "\n");
}

inline LocalDataset read_dataset(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  try {
    return decode_dataset(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.detail(), e.offset());
  }
}

}  // namespace digcsi::channel
