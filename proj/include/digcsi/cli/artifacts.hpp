#pragma once

// On-disk layout of a run directory and the small formats only the CLI uses.
//
//   config.json, config.resolved.json
//   datasets/scenario.json, datasets/ueNNNN.digc (+ .json sidecar)
//   generators/z{zdim}/ueNNNN.{json,bin}
//   fake/z{zdim}/ueNNNN.digf
//   codecs/{arm}_n{count}_z{zdim}_r{a-b}.{json,bin}
//   logs/local_z{zdim}_ueNNNN.json, logs/global_{arm}_n{count}_z{zdim}_r{a-b}.json
//   overhead.json, report.json, results.csv

#include <cstdio>
#include <filesystem>
#include <string>

#include "digcsi/io/binary.hpp"
#include "digcsi/orchestrator/experiment.hpp"
#include "json.hpp"

namespace digcsi::cli {

namespace fs = std::filesystem;

namespace paths {

inline std::string ue_tag(std::uint32_t id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "ue%04u", id);
  return buf;
}

inline fs::path dataset(const fs::path& out, std::uint32_t id) { return out / "datasets" / (ue_tag(id) + ".digc"); }
inline fs::path scenario_manifest(const fs::path& out) { return out / "datasets" / "scenario.json"; }
inline fs::path generator(const fs::path& out, std::size_t zdim, std::uint32_t id) {
  return out / "generators" / ("z" + std::to_string(zdim)) / ue_tag(id);
}
inline fs::path fake(const fs::path& out, std::size_t zdim, std::uint32_t id) {
  return out / "fake" / ("z" + std::to_string(zdim)) / (ue_tag(id) + ".digf");
}

inline std::string cell_tag(orchestrator::Framework arm, std::size_t ue_count, std::size_t zdim, codec::Ratio r) {
  return std::string(orchestrator::framework_name(arm)) + "_n" + std::to_string(ue_count) + "_z" +
         std::to_string(zdim) + "_r" + r.tag();
}
inline fs::path codec(const fs::path& out, const orchestrator::ExperimentPlan& plan, codec::Ratio r) {
  return out / "codecs" / cell_tag(plan.framework, plan.participants.size(), plan.zdim, r);
}
inline fs::path local_log(const fs::path& out, std::size_t zdim, std::uint32_t id) {
  return out / "logs" / ("local_z" + std::to_string(zdim) + "_" + ue_tag(id) + ".json");
}
inline fs::path global_log(const fs::path& out, const orchestrator::ExperimentPlan& plan, codec::Ratio r) {
  return out / "logs" / ("global_" + cell_tag(plan.framework, plan.participants.size(), plan.zdim, r) + ".json");
}

}  // namespace paths

// --- fake sample sets --------------------------------------------------------
// "DIGF" | u16 version | u32 ue_id | u32 zdim | u64 count | u32 C | u32 H | u32 W | f32 samples

inline constexpr char kFakeMagic[4] = {'D', 'I', 'G', 'F'};
inline constexpr std::uint16_t kFakeVersion = 1;

inline void write_fake(const fs::path& path, const numeric::Tensor<float>& samples, std::uint32_t ue_id,
                       std::size_t zdim) {
  numeric::require_rank(samples, 4, "fake samples");
  io::ByteWriter w;
  w.put_bytes({kFakeMagic, 4});
  w.put<std::uint16_t>(kFakeVersion);
  w.put<std::uint32_t>(ue_id);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(zdim));
  w.put<std::uint64_t>(samples.dim(0));
  for (std::size_t d = 1; d < 4; ++d) w.put<std::uint32_t>(static_cast<std::uint32_t>(samples.dim(d)));
  w.put_all(samples.data());
  io::write_file(path, w.bytes());
}

inline numeric::Tensor<float> read_fake(const fs::path& path) {
  const auto bytes = io::read_file(path);
  try {
    io::ByteReader r(bytes);
    if (r.get_bytes(4, "magic") != std::string(kFakeMagic, 4)) throw ParseError("not a fake sample file", 0);
    const auto version = r.get<std::uint16_t>("version");
    if (version != kFakeVersion) {
      throw ParseError("unsupported fake sample version " + std::to_string(version), 4);
    }
    r.get<std::uint32_t>("ue id");
    r.get<std::uint32_t>("zdim");
    const auto count = r.get<std::uint64_t>("count");
    numeric::Shape shape{static_cast<std::size_t>(count)};
    for (const char* f : {"channels", "height", "width"}) shape.push_back(r.get<std::uint32_t>(f));
    numeric::Tensor<float> out(shape);
    r.get_all(out.data(), "samples");
    if (r.remaining() != 0) throw ParseError("trailing bytes after samples", r.offset());
    return out;
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.detail(), e.offset());
  }
}

// --- logs --------------------------------------------------------------------

inline nlohmann::json local_run_json(const orchestrator::LocalRun& run) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : run.log) {
    epochs.push_back({{"epoch", e.epoch}, {"reconstruction", e.reconstruction}, {"swd", e.swd}, {"mse", e.mse}});
  }
  return {{"ue_id", run.ue_id},
          {"zdim", run.zdim},
          {"ok", run.ok},
          {"error", run.error},
          {"final_reconstruction", run.final_reconstruction},
          {"generator_bytes", run.generator_bytes},
          {"epochs", epochs}};
}

inline orchestrator::LocalRun local_run_from_json(const nlohmann::json& j) {
  orchestrator::LocalRun run;
  run.ue_id = j.at("ue_id");
  run.zdim = j.at("zdim");
  run.ok = j.at("ok");
  run.error = j.at("error");
  run.final_reconstruction = j.at("final_reconstruction");
  run.generator_bytes = j.at("generator_bytes");
  for (const auto& e : j.at("epochs")) run.log.push_back({e.at("epoch"), e.at("reconstruction"), e.at("swd"), e.at("mse")});
  return run;
}

inline nlohmann::json codec_log_json(bool ok, const std::string& error, std::size_t training_samples,
                                     const std::vector<codec::CodecEpochLog>& log) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : log) epochs.push_back({{"epoch", e.epoch}, {"loss", e.loss}});
  return {{"ok", ok}, {"error", error}, {"training_samples", training_samples}, {"epochs", epochs}};
}

/// Reads a JSON artifact; a corrupt file is a parse error naming the path.
inline nlohmann::json read_json_file(const fs::path& path) {
  const auto text = io::read_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

inline void write_json_file(const fs::path& path, const nlohmann::json& j) {
  io::write_text(path, j.dump(2) + "\n");
}

}  // namespace digcsi::cli
