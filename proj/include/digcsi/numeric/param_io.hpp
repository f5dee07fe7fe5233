#pragma once

// Parameter files come in pairs: `<stem>.json` is the manifest (entry names,
// shapes, byte offsets, precision, total_bytes plus any caller metadata) and
// `<stem>.bin` is the raw little-endian blob, entries concatenated in
// manifest order.

#include "json.hpp"

#include <filesystem>

#include "digcsi/io/binary.hpp"
#include "digcsi/numeric/parameters.hpp"

namespace digcsi::numeric {

inline std::filesystem::path manifest_path(const std::filesystem::path& stem) {
  return std::filesystem::path(stem.string() + ".json");
}
inline std::filesystem::path blob_path(const std::filesystem::path& stem) {
  return std::filesystem::path(stem.string() + ".bin");
}

template <class T>
std::uint64_t parameter_bytes(const ParameterSet<T>& params) {
  return params.total_scalar_count() * sizeof(T);
}

template <class T>
nlohmann::json parameter_manifest(const ParameterSet<T>& params) {
  nlohmann::json entries = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& e : params.entries()) {
    const std::uint64_t bytes = e.value.size() * sizeof(T);
    entries.push_back({{"name", e.name}, {"shape", e.value.shape()}, {"offset", offset},
                       {"bytes", bytes}});
    offset += bytes;
  }
  return {{"format", "digcsi-params"},
          {"version", 1},
          {"precision", precision_name(precision_of<T>())},
          {"entries", std::move(entries)},
          {"total_bytes", offset}};
}

/// Writes the parameter pair. Keys in `metadata` are merged into the manifest.
template <class T>
void write_parameters(const std::filesystem::path& stem, const ParameterSet<T>& params,
                      const nlohmann::json& metadata = nlohmann::json::object()) {
  nlohmann::json manifest = parameter_manifest(params);
  for (const auto& [key, value] : metadata.items()) manifest[key] = value;
  io::ByteWriter w;
  for (const auto& e : params.entries()) w.put_all(e.value.data());
  io::write_file(blob_path(stem), w.bytes());
  io::write_text(manifest_path(stem), manifest.dump(2) + "\n");
}

inline nlohmann::json read_manifest(const std::filesystem::path& stem) {
  const auto path = manifest_path(stem);
  const std::string text = io::read_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), e.byte);
  }
}

/// Reads a parameter pair written with the same or the other precision;
/// values are converted to T.
template <class T>
ParameterSet<T> read_parameters(const std::filesystem::path& stem, nlohmann::json* manifest_out = nullptr) {
  const nlohmann::json manifest = read_manifest(stem);
  const auto bytes = io::read_file(blob_path(stem));
  ParameterSet<T> params;
  try {
    const std::string precision = manifest.at("precision");
    if (precision != "f32" && precision != "f64") {
      throw ParseError("unknown precision '" + precision + "'", 0);
    }
    const std::uint64_t total = manifest.at("total_bytes");
    if (total != bytes.size()) {
      throw ParseError("blob holds " + std::to_string(bytes.size()) + " bytes, manifest says " +
                           std::to_string(total),
                       std::min<std::uint64_t>(total, bytes.size()));
    }
    io::ByteReader r(bytes);
    for (const auto& e : manifest.at("entries")) {
      const std::uint64_t offset = e.at("offset");
      if (offset != r.offset()) throw ParseError("entry offsets are not contiguous", r.offset());
      const Shape shape = e.at("shape").get<Shape>();
      const std::size_t i = params.add(e.at("name").get<std::string>(), shape);
      auto& value = params[i].value;
      if (precision == "f32") {
        std::vector<float> tmp(value.size());
        r.get_all(std::span<float>(tmp), "parameter blob");
        std::copy(tmp.begin(), tmp.end(), value.raw());
      } else {
        std::vector<double> tmp(value.size());
        r.get_all(std::span<double>(tmp), "parameter blob");
        std::copy(tmp.begin(), tmp.end(), value.raw());
      }
    }
    if (r.remaining() != 0) throw ParseError("trailing bytes in parameter blob", r.offset());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path(stem).string() + ": malformed manifest: " + e.what(), 0);
  }
  if (manifest_out) *manifest_out = manifest;
  return params;
}

/// Copies values from `source` into `target`, matching entries by name and shape.
template <class T>
void load_values(ParameterSet<T>& target, const ParameterSet<T>& source) {
  if (target.size() != source.size()) {
    throw ShapeError("parameter count mismatch: expected " + std::to_string(target.size()) +
                     " entries, file has " + std::to_string(source.size()));
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto& src = source[i];
    auto& dst = target[target.index_of(src.name)];
    if (dst.value.shape() != src.value.shape()) {
      throw ShapeError("parameter '" + src.name + "' has shape " + shape_string(src.value.shape()) +
                       ", expected " + shape_string(dst.value.shape()));
    }
    dst.value = src.value;
  }
}

}  // namespace digcsi::numeric
