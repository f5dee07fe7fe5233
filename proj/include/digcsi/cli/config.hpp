#pragma once

// JSON run configuration for the command-line tool. Every key is optional;
// unknown keys are rejected so typos surface as config errors.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "digcsi/io/binary.hpp"
#include "digcsi/orchestrator/experiment.hpp"
#include "json.hpp"

namespace digcsi::cli {

using nlohmann::json;

enum class Precision { f32, f64 };

inline const char* precision_name(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

inline Precision parse_precision(const std::string& s) {
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  throw ConfigError("precision must be f32 or f64, got '" + s + "'");
}

struct RunConfig {
  std::uint64_t seed = 1;
  Precision precision = Precision::f32;
  unsigned jobs = 1;
  channel::ScenarioConfig scenario;
  std::vector<orchestrator::Framework> arms{orchestrator::Framework::digcsi, orchestrator::Framework::cl_all,
                                            orchestrator::Framework::cl_fraction};
  std::vector<std::size_t> ue_counts{10, 40, 70, 100};
  std::vector<std::size_t> zdims{400};
  orchestrator::ExperimentPlan base;  // ratios, K, f, training configs, codec widths

  void validate() const {
    scenario.validate();
    if (arms.empty()) throw ConfigError("experiment.arms is empty");
    if (ue_counts.empty()) throw ConfigError("experiment.ue_counts is empty");
    if (zdims.empty()) throw ConfigError("experiment.zdims is empty");
    for (auto n : ue_counts) {
      if (n == 0 || n > scenario.ue_count) {
        throw ConfigError("experiment.ue_counts: " + std::to_string(n) + " is outside [1, " +
                          std::to_string(scenario.ue_count) + "]");
      }
    }
    for (auto z : zdims) {
      if (z == 0) throw ConfigError("experiment.zdims: zdim must be positive");
    }
    if (base.ratios.empty()) throw ConfigError("experiment.ratios is empty");
    if (base.fraction && !(*base.fraction > 0 && *base.fraction <= 1)) {
      throw ConfigError("experiment.fraction must satisfy 0 < f <= 1");
    }
    if (base.fake_per_ue && *base.fake_per_ue == 0) throw ConfigError("experiment.fake_per_ue must be >= 1");
    if (base.local.batch_size == 0 || base.global.batch_size == 0) throw ConfigError("batch_size must be >= 1");
    base.local.swd.validate();
    for (const auto& r : base.ratios) {
      orchestrator::codec_architecture(base, orchestrator::ScenarioData{scenario, {}}, r);
    }
    if (jobs == 0) throw ConfigError("jobs must be >= 1");
  }
};

namespace detail {

inline void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [k, _] : obj.items()) {
    if (!known.contains(k)) throw ConfigError("unknown key '" + (where.empty() ? k : where + "." + k) + "'");
  }
}

template <class T>
struct is_vector : std::false_type {};
template <class U>
struct is_vector<std::vector<U>> : std::true_type {};

// nlohmann converts -3 or 2.5 to an unsigned silently; refuse that here
template <class T>
bool integral_fits(const json& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v.is_boolean();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) return false;
    return std::is_signed_v<T> || v.is_number_unsigned();
  } else if constexpr (is_vector<T>::value) {
    if (!v.is_array()) return false;
    for (const auto& e : v) {
      if (!integral_fits<typename T::value_type>(e)) return false;
    }
    return true;
  } else {
    return true;
  }
}

template <class T>
void read_into(const json& obj, const char* key, const std::string& where, T& target) {
  if (!obj.contains(key)) return;
  try {
    if (!integral_fits<T>(obj.at(key))) throw std::invalid_argument("integer expected");
    target = obj.at(key).get<T>();
  } catch (const std::exception&) {
    throw ConfigError("'" + (where.empty() ? std::string(key) : where + "." + key) +
                      "' has the wrong type: " + obj.at(key).dump());
  }
}

inline void read_adam(const json& obj, const std::string& where, numeric::AdamConfig& adam) {
  read_into(obj, "lr", where, adam.lr);
  read_into(obj, "beta1", where, adam.beta1);
  read_into(obj, "beta2", where, adam.beta2);
  read_into(obj, "eps", where, adam.eps);
  if (!(adam.lr > 0)) throw ConfigError(where + ".lr must be positive");
}

inline json merged(json a, const json& b) {
  a.update(b);
  return a;
}

inline json adam_json(const numeric::AdamConfig& a) {
  return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}};
}

}  // namespace detail

/// Parses JSON text. Syntax errors report line and column.
inline json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports a byte position; recover line/column from it
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": malformed JSON (line " + std::to_string(line) + ", column " + std::to_string(col) + ")");
  }
}

inline RunConfig config_from_json(const json& j) {
  using detail::read_into;
  RunConfig c;
  detail::reject_unknown(j, "", {"seed", "precision", "jobs", "scenario", "experiment", "swd", "local", "global", "codec"});
  read_into(j, "seed", "", c.seed);
  read_into(j, "jobs", "", c.jobs);
  if (j.contains("precision")) {
    std::string p;
    read_into(j, "precision", "", p);
    c.precision = parse_precision(p);
  }

  if (j.contains("scenario")) {
    const auto& s = j.at("scenario");
    detail::reject_unknown(s, "scenario",
                           {"cell_edge_m", "ue_count", "walk_box_edge_m", "walk_length_m", "snapshot_spacing_m",
                            "antennas", "subcarriers", "carrier_hz", "bandwidth_hz", "cluster_count", "rician_k_db",
                            "scatterer_min_radius_m", "scatterer_max_radius_m", "turn_sigma_rad"});
    auto& sc = c.scenario;
    read_into(s, "cell_edge_m", "scenario", sc.cell_edge_m);
    read_into(s, "ue_count", "scenario", sc.ue_count);
    read_into(s, "walk_box_edge_m", "scenario", sc.walk_box_edge_m);
    read_into(s, "walk_length_m", "scenario", sc.walk_length_m);
    read_into(s, "snapshot_spacing_m", "scenario", sc.snapshot_spacing_m);
    read_into(s, "antennas", "scenario", sc.antennas);
    read_into(s, "subcarriers", "scenario", sc.subcarriers);
    read_into(s, "carrier_hz", "scenario", sc.carrier_hz);
    read_into(s, "bandwidth_hz", "scenario", sc.bandwidth_hz);
    read_into(s, "cluster_count", "scenario", sc.cluster_count);
    read_into(s, "rician_k_db", "scenario", sc.rician_k_db);
    read_into(s, "scatterer_min_radius_m", "scenario", sc.scatterer_min_radius_m);
    read_into(s, "scatterer_max_radius_m", "scenario", sc.scatterer_max_radius_m);
    read_into(s, "turn_sigma_rad", "scenario", sc.turn_sigma_rad);
  }

  if (j.contains("experiment")) {
    const auto& e = j.at("experiment");
    detail::reject_unknown(e, "experiment", {"arms", "ue_counts", "zdims", "ratios", "fake_per_ue", "fraction"});
    if (e.contains("arms")) {
      std::vector<std::string> names;
      read_into(e, "arms", "experiment", names);
      c.arms.clear();
      for (const auto& n : names) c.arms.push_back(orchestrator::parse_framework(n));
    }
    read_into(e, "ue_counts", "experiment", c.ue_counts);
    read_into(e, "zdims", "experiment", c.zdims);
    if (e.contains("ratios")) {
      std::vector<std::string> names;
      read_into(e, "ratios", "experiment", names);
      c.base.ratios.clear();
      for (const auto& n : names) c.base.ratios.push_back(codec::parse_ratio(n));
    }
    if (e.contains("fake_per_ue") && !e.at("fake_per_ue").is_null()) {
      std::size_t k = 0;
      read_into(e, "fake_per_ue", "experiment", k);
      c.base.fake_per_ue = k;
    }
    if (e.contains("fraction") && !e.at("fraction").is_null()) {
      double f = 0;
      read_into(e, "fraction", "experiment", f);
      c.base.fraction = f;
    }
  }

  if (j.contains("swd")) {
    const auto& s = j.at("swd");
    detail::reject_unknown(s, "swd", {"directions", "weight", "cost"});
    read_into(s, "directions", "swd", c.base.local.swd.directions);
    read_into(s, "weight", "swd", c.base.local.swd.weight);
    if (s.contains("cost")) {
      std::string name;
      read_into(s, "cost", "swd", name);
      c.base.local.swd.cost = swae::parse_ground_cost(name);
    }
  }

  if (j.contains("local")) {
    const auto& l = j.at("local");
    detail::reject_unknown(l, "local",
                           {"epochs", "batch_size", "lr", "beta1", "beta2", "eps", "reconstruction_cost", "reduction"});
    read_into(l, "epochs", "local", c.base.local.epochs);
    read_into(l, "batch_size", "local", c.base.local.batch_size);
    detail::read_adam(l, "local", c.base.local.adam);
    if (l.contains("reconstruction_cost")) {
      std::string name;
      read_into(l, "reconstruction_cost", "local", name);
      c.base.local.reconstruction_cost = swae::parse_ground_cost(name);
    }
    if (l.contains("reduction")) {
      std::string name;
      read_into(l, "reduction", "local", name);
      c.base.local.reduction = swae::parse_reduction(name);
    }
  }

  if (j.contains("global")) {
    const auto& g = j.at("global");
    detail::reject_unknown(g, "global", {"epochs", "batch_size", "lr", "beta1", "beta2", "eps"});
    read_into(g, "epochs", "global", c.base.global.epochs);
    read_into(g, "batch_size", "global", c.base.global.batch_size);
    detail::read_adam(g, "global", c.base.global.adam);
  }

  if (j.contains("codec")) {
    const auto& k = j.at("codec");
    detail::reject_unknown(k, "codec", {"refine_widths", "refine_blocks"});
    read_into(k, "refine_widths", "codec", c.base.refine_widths);
    read_into(k, "refine_blocks", "codec", c.base.refine_blocks);
  }

  c.base.seed = c.seed;
  c.base.jobs = c.jobs;
  c.scenario.seed = c.seed;
  return c;
}

/// Every field with its effective value.
inline json resolved_json(const RunConfig& c) {
  const auto& sc = c.scenario;
  const auto& p = c.base;
  json arms = json::array(), ratios = json::array();
  for (auto a : c.arms) arms.push_back(orchestrator::framework_name(a));
  for (const auto& r : p.ratios) ratios.push_back(r.str());
  return {
      {"seed", c.seed},
      {"precision", precision_name(c.precision)},
      {"jobs", c.jobs},
      {"scenario",
       {{"cell_edge_m", sc.cell_edge_m},
        {"ue_count", sc.ue_count},
        {"walk_box_edge_m", sc.walk_box_edge_m},
        {"walk_length_m", sc.walk_length_m},
        {"snapshot_spacing_m", sc.snapshot_spacing_m},
        {"antennas", sc.antennas},
        {"subcarriers", sc.subcarriers},
        {"carrier_hz", sc.carrier_hz},
        {"bandwidth_hz", sc.bandwidth_hz},
        {"cluster_count", sc.cluster_count},
        {"rician_k_db", sc.rician_k_db},
        {"scatterer_min_radius_m", sc.scatterer_min_radius_m},
        {"scatterer_max_radius_m", sc.scatterer_max_radius_m},
        {"turn_sigma_rad", sc.turn_sigma_rad}}},
      {"experiment",
       {{"arms", arms},
        {"ue_counts", c.ue_counts},
        {"zdims", c.zdims},
        {"ratios", ratios},
        {"fake_per_ue", p.fake_per_ue ? json(*p.fake_per_ue) : json(nullptr)},
        {"fraction", p.fraction ? json(*p.fraction) : json(nullptr)}}},
      {"swd",
       {{"directions", p.local.swd.directions},
        {"weight", p.local.swd.weight},
        {"cost", swae::ground_cost_name(p.local.swd.cost)}}},
      {"local", detail::merged({{"epochs", p.local.epochs},
                                {"batch_size", p.local.batch_size},
                                {"reconstruction_cost", swae::ground_cost_name(p.local.reconstruction_cost)},
                                {"reduction", swae::reduction_name(p.local.reduction)}},
                               detail::adam_json(p.local.adam))},
      {"global", detail::merged({{"epochs", p.global.epochs}, {"batch_size", p.global.batch_size}},
                                detail::adam_json(p.global.adam))},
      {"codec", {{"refine_widths", p.refine_widths}, {"refine_blocks", p.refine_blocks}}},
  };
}

}  // namespace digcsi::cli
