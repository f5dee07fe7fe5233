#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "digcsi/channel/dataset.hpp"
#include "digcsi/codec/codec.hpp"
#include "digcsi/orchestrator/ledger.hpp"
#include "digcsi/orchestrator/metrics.hpp"
#include "digcsi/orchestrator/parallel.hpp"
#include "digcsi/swae/generator.hpp"
#include "digcsi/swae/train.hpp"

namespace digcsi::orchestrator {

enum class Framework { digcsi, cl_all, cl_fraction };

inline const char* framework_name(Framework f) {
  switch (f) {
    case Framework::digcsi: return "digcsi";
    case Framework::cl_all: return "cl_all";
    case Framework::cl_fraction: return "cl_fraction";
  }
  return "?";
}

inline Framework parse_framework(const std::string& name) {
  if (name == "digcsi") return Framework::digcsi;
  if (name == "cl_all") return Framework::cl_all;
  if (name == "cl_fraction") return Framework::cl_fraction;
  throw ConfigError("unknown arm '" + name + "' (expected digcsi, cl_all or cl_fraction)");
}

/// All UE datasets of one scenario, indexed by UE id.
struct ScenarioData {
  channel::ScenarioConfig config;
  std::vector<channel::LocalDataset> datasets;

  std::size_t ue_count() const { return datasets.size(); }
  const channel::LocalDataset& ue(std::uint32_t id) const { return datasets.at(id); }
};

inline ScenarioData generate_scenario(const channel::ScenarioConfig& config, unsigned jobs = 1) {
  config.validate();
  const auto ues = channel::place_ues(config);
  ScenarioData data{config, std::vector<channel::LocalDataset>(ues.size())};
  parallel_for(ues.size(), jobs,
               [&](std::size_t i) { data.datasets[i] = channel::build_local_dataset(ues[i], config); });
  return data;
}

struct ExperimentPlan {
  Framework framework = Framework::digcsi;
  std::vector<std::uint32_t> participants;
  std::vector<codec::Ratio> ratios{{1, 4}, {1, 8}, {1, 16}, {1, 32}, {1, 64}};
  std::size_t zdim = 400;
  std::optional<std::size_t> fake_per_ue;  // K; local dataset size when unset
  std::optional<double> fraction;          // cl_fraction f; matched overhead when unset
  swae::LocalTrainingConfig local;
  codec::CodecTrainingConfig global;
  std::vector<std::size_t> refine_widths{8, 16};
  std::size_t refine_blocks = 2;
  std::uint64_t seed = 1;
  unsigned jobs = 1;

  void validate(const ScenarioData& data) const {
    if (participants.empty()) throw ConfigError("plan: no participating UEs");
    for (auto id : participants) {
      if (id >= data.ue_count()) {
        throw ConfigError("plan: UE " + std::to_string(id) + " is not part of the scenario");
      }
    }
    if (ratios.empty()) throw ConfigError("plan: no compression ratios");
    if (zdim == 0 && framework != Framework::cl_all) throw ConfigError("plan: zdim must be positive");
    if (fraction && !(*fraction > 0 && *fraction <= 1)) {
      throw ConfigError("plan: cl_fraction must satisfy 0 < f <= 1");
    }
    if (fake_per_ue && *fake_per_ue == 0) throw ConfigError("plan: K must be positive");
  }
};

/// First `count` UE ids.
inline std::vector<std::uint32_t> first_ues(std::size_t count) {
  std::vector<std::uint32_t> ids(count);
  std::iota(ids.begin(), ids.end(), 0u);
  return ids;
}

inline swae::SwaeArchitecture local_architecture(const ScenarioData& data, std::size_t zdim) {
  swae::SwaeArchitecture arch;
  arch.height = data.config.subcarriers;
  arch.width = data.config.antennas;
  arch.zdim = zdim;
  return arch;
}

inline codec::CodecArchitecture codec_architecture(const ExperimentPlan& plan, const ScenarioData& data,
                                                  codec::Ratio ratio) {
  auto arch = codec::CodecArchitecture::for_ratio(ratio, 2, data.config.subcarriers, data.config.antennas);
  arch.refine_widths = plan.refine_widths;
  arch.refine_blocks = plan.refine_blocks;
  arch.validate();
  return arch;
}

// Seeds are derived from the master seed and the role of the stream, never
// from execution order, so the staged CLI and the in-process sweep agree.
inline std::uint64_t local_seed(std::uint64_t master, std::uint32_t ue_id, std::size_t zdim) {
  return numeric::derive_seed(master, std::uint64_t{ue_id}, "swae", std::uint64_t{zdim});
}
inline std::uint64_t generation_seed(std::uint64_t master, std::uint32_t ue_id, std::size_t zdim) {
  return numeric::derive_seed(master, "generate", std::uint64_t{ue_id}, std::uint64_t{zdim});
}
inline std::uint64_t codec_seed(std::uint64_t master, codec::Ratio ratio, std::size_t ue_count) {
  return numeric::derive_seed(master, "codec", std::uint64_t{ratio.num}, std::uint64_t{ratio.den},
                              std::uint64_t{ue_count});
}
inline std::uint64_t subsample_seed(std::uint64_t master, std::uint32_t ue_id) {
  return numeric::derive_seed(master, "cl_fraction", std::uint64_t{ue_id});
}

/// Outcome of one UE's local generator training.
struct LocalRun {
  std::uint32_t ue_id = 0;
  std::size_t zdim = 0;
  bool ok = false;
  std::string error;
  std::vector<swae::LocalEpochLog> log;
  double final_reconstruction = 0;
  std::uint64_t generator_bytes = 0;
};

struct CellResult {
  Framework framework = Framework::digcsi;
  std::size_t ue_count = 0;
  codec::Ratio ratio;
  std::size_t zdim = 0;
  double pnmse_db = std::nan("");
  double gnmse_db = std::nan("");
  std::uint64_t upload_bytes_total = 0;
  double proportion = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  bool ok = false;
  std::string error;
  std::size_t training_samples = 0;
  std::vector<codec::CodecEpochLog> log;
};

struct EvaluationReport {
  Framework framework = Framework::digcsi;
  std::vector<std::uint32_t> participants;
  std::size_t zdim = 0;
  std::uint64_t seed = 0;
  double fraction = 1.0;
  OverheadLedger ledger;
  std::vector<LocalRun> local_runs;
  std::vector<std::uint32_t> failed_ues;
  std::vector<CellResult> cells;
};

/// Trained generators and evaluation sets shared between plans of one sweep.
template <class T>
class Workspace {
 public:
  explicit Workspace(const ScenarioData& data) : data_(data) {}

  const ScenarioData& data() const { return data_; }

  struct GeneratorSlot {
    LocalRun run;
    std::optional<swae::GeneratorArtifact<T>> artifact;
  };

  /// Trains (or returns cached) generators for `ues`, fanning out over `jobs` threads.
  std::vector<const GeneratorSlot*> generators(const std::vector<std::uint32_t>& ues,
                                               std::size_t zdim, const swae::LocalTrainingConfig& cfg,
                                               std::uint64_t master, unsigned jobs) {
    std::vector<std::uint32_t> missing;
    {
      std::lock_guard lock(mutex_);
      for (auto id : ues) {
        if (!generators_.contains({id, zdim})) missing.push_back(id);
      }
    }
    std::vector<GeneratorSlot> fresh(missing.size());
    const auto arch = local_architecture(data_, zdim);
    parallel_for(missing.size(), jobs, [&](std::size_t i) {
      fresh[i] = train_generator(data_.ue(missing[i]), arch, cfg, master);
    });
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < missing.size(); ++i) {
      generators_.emplace(std::pair{missing[i], zdim}, std::make_unique<GeneratorSlot>(std::move(fresh[i])));
    }
    std::vector<const GeneratorSlot*> out;
    for (auto id : ues) out.push_back(generators_.at({id, zdim}).get());
    return out;
  }

  /// Inject a generator produced elsewhere (e.g. read back from disk).
  void put_generator(std::size_t zdim, GeneratorSlot slot) {
    std::lock_guard lock(mutex_);
    const auto id = slot.run.ue_id;
    generators_.insert_or_assign(std::pair{id, zdim}, std::make_unique<GeneratorSlot>(std::move(slot)));
  }

  static GeneratorSlot train_generator(const channel::LocalDataset& ds, const swae::SwaeArchitecture& arch,
                                       const swae::LocalTrainingConfig& cfg, std::uint64_t master) {
    GeneratorSlot slot;
    slot.run.ue_id = ds.ue_id;
    slot.run.zdim = arch.zdim;
    try {
      auto model = swae::train_local<T>(ds, arch, cfg, local_seed(master, ds.ue_id, arch.zdim));
      slot.run.log = model.log;
      slot.run.final_reconstruction = model.final_reconstruction;
      slot.artifact = swae::make_generator(model.decoder, arch, ds.ue_id, ds.norm_scale);
      slot.run.generator_bytes = slot.artifact->total_bytes();
      slot.run.ok = true;
    } catch (const DivergenceError& e) {
      slot.run.error = e.what();
    }
    return slot;
  }

  const numeric::Tensor<float>& test_set(const std::vector<std::uint32_t>& ues) {
    std::lock_guard lock(mutex_);
    auto it = test_sets_.find(ues);
    if (it != test_sets_.end()) return *it->second;
    std::vector<numeric::Tensor<float>> parts;
    for (auto id : ues) parts.push_back(channel::gather(data_.ue(id).samples, data_.ue(id).test));
    std::vector<const numeric::Tensor<float>*> ptrs;
    for (const auto& p : parts) ptrs.push_back(&p);
    auto [pos, _] = test_sets_.emplace(ues, std::make_unique<numeric::Tensor<float>>(channel::concat(ptrs)));
    return *pos->second;
  }

  const numeric::Tensor<float>& global_test_set() { return test_set(first_ues(data_.ue_count())); }

 private:
  const ScenarioData& data_;
  std::mutex mutex_;
  std::map<std::pair<std::uint32_t, std::size_t>, std::unique_ptr<GeneratorSlot>> generators_;
  std::map<std::vector<std::uint32_t>, std::unique_ptr<numeric::Tensor<float>>> test_sets_;
};

inline std::uint64_t cl_all_bytes(const ScenarioData& data, const std::vector<std::uint32_t>& ues) {
  std::uint64_t total = 0;
  for (auto id : ues) {
    total += dataset_upload_bytes(data.ue(id).train.size(), data.config.subcarriers, data.config.antennas);
  }
  return total;
}

/// f that makes the CL upload match the generator upload of `zdim`. Generators
/// are uploaded at training precision, `scalar_bytes` per parameter.
inline double matched_fraction(const ScenarioData& data, const std::vector<std::uint32_t>& ues,
                               std::size_t zdim, std::size_t scalar_bytes = sizeof(float)) {
  const std::uint64_t per_ue = swae::decoder_parameter_count(local_architecture(data, zdim)) * scalar_bytes;
  const std::uint64_t digcsi = per_ue * ues.size();
  return std::min(1.0, static_cast<double>(digcsi) / static_cast<double>(cl_all_bytes(data, ues)));
}

/// ceil(f * n), treating products within 1e-9 of an integer as exact.
inline std::size_t fraction_count(double f, std::size_t n) {
  const double prod = f * static_cast<double>(n);
  if (prod < 1.0 - 1e-9) {
    throw ArgumentError("cl_fraction: f * train size = " + std::to_string(prod) + " is below one sample");
  }
  const double nearest = std::round(prod);
  const auto count = static_cast<std::size_t>(std::abs(prod - nearest) < 1e-9 ? nearest : std::ceil(prod));
  return std::min(count, n);
}

/// Seeded uniform subsample of a train split, returned in ascending order so
/// that f = 1 reproduces the full split exactly.
inline std::vector<std::size_t> subsample_train(const channel::LocalDataset& ds, double f,
                                                std::uint64_t master) {
  const std::size_t count = fraction_count(f, ds.train.size());
  std::vector<std::size_t> pool = ds.train;
  numeric::Rng rng(subsample_seed(master, ds.ue_id));
  channel::fisher_yates(pool, rng);
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

namespace detail {

template <class T>
CellResult train_and_score(Workspace<T>& ws, const ExperimentPlan& plan, codec::Ratio ratio,
                           const numeric::Tensor<float>& training) {
  CellResult cell;
  cell.framework = plan.framework;
  cell.ue_count = plan.participants.size();
  cell.ratio = ratio;
  cell.zdim = plan.zdim;
  cell.seed = plan.seed;
  cell.training_samples = training.dim(0);
  const auto arch = codec_architecture(plan, ws.data(), ratio);
  auto trained = codec::train_codec<T>(training, arch, plan.global,
                                       codec_seed(plan.seed, ratio, plan.participants.size()));
  cell.log = trained.log;
  const auto scores = evaluate(&trained.codec, ws.test_set(plan.participants), ws.global_test_set());
  cell.pnmse_db = scores.pnmse_db;
  cell.gnmse_db = scores.gnmse_db;
  cell.ok = true;
  return cell;
}

template <class T>
void score_all_ratios(Workspace<T>& ws, const ExperimentPlan& plan, const numeric::Tensor<float>& training,
                      EvaluationReport& report) {
  for (const auto& ratio : plan.ratios) {
    CellResult cell;
    try {
      cell = train_and_score(ws, plan, ratio, training);
    } catch (const Error& e) {
      cell.framework = plan.framework;
      cell.ue_count = plan.participants.size();
      cell.ratio = ratio;
      cell.zdim = plan.zdim;
      cell.seed = plan.seed;
      cell.error = e.what();
    }
    cell.upload_bytes_total = report.ledger.total_bytes();
    cell.proportion = report.ledger.proportion();
    report.cells.push_back(std::move(cell));
  }
}

}  // namespace detail

/// K, defaulting to the local dataset size.
inline std::size_t fake_count(const ExperimentPlan& plan, const ScenarioData& data) {
  return plan.fake_per_ue.value_or(data.ue(plan.participants.front()).count());
}

/// Fake CSI produced at the server from the uploaded generators, concatenated in UE order.
template <class T>
numeric::Tensor<float> synthesize_global_dataset(
    const std::vector<const typename Workspace<T>::GeneratorSlot*>& slots, std::size_t k,
    std::uint64_t master, unsigned jobs) {
  std::vector<const typename Workspace<T>::GeneratorSlot*> ok;
  for (const auto* s : slots) {
    if (s->artifact) ok.push_back(s);
  }
  std::vector<numeric::Tensor<float>> parts(ok.size());
  parallel_for(ok.size(), jobs, [&](std::size_t i) {
    auto artifact = *ok[i]->artifact;  // forward caches activations; work on a copy
    parts[i] = swae::generate(artifact, k, generation_seed(master, artifact.ue_id, artifact.zdim()));
  });
  std::vector<const numeric::Tensor<float>*> ptrs;
  for (const auto& p : parts) ptrs.push_back(&p);
  return channel::concat(ptrs);
}

/// Local SWAE per participant, generator upload, server-side synthesis of K
/// samples per generator, global codec training on the synthetic set.
template <class T>
EvaluationReport run_digcsi(const ExperimentPlan& plan, Workspace<T>& ws) {
  const auto& data = ws.data();
  plan.validate(data);
  EvaluationReport report;
  report.framework = Framework::digcsi;
  report.participants = plan.participants;
  report.zdim = plan.zdim;
  report.seed = plan.seed;

  const auto slots = ws.generators(plan.participants, plan.zdim, plan.local, plan.seed, plan.jobs);
  for (const auto* s : slots) {
    report.local_runs.push_back(s->run);
    if (s->run.ok) {
      report.ledger.rows.push_back({s->run.ue_id, s->run.generator_bytes});
    } else {
      report.failed_ues.push_back(s->run.ue_id);
    }
  }
  if (report.ledger.rows.empty()) {
    throw DivergenceError("digcsi: local training diverged for every participating UE");
  }
  report.ledger.cl_all_bytes = cl_all_bytes(data, plan.participants);
  report.fraction = report.ledger.proportion();

  const std::size_t k = fake_count(plan, data);
  const auto fake = synthesize_global_dataset<T>(slots, k, plan.seed, plan.jobs);
  detail::score_all_ratios(ws, plan, fake, report);
  return report;
}

/// What the CL arms upload: the training set, its ledger and the fraction used.
struct ClUpload {
  numeric::Tensor<float> training;
  OverheadLedger ledger;
  double fraction = 1.0;
};

/// cl_all takes every participant's train split, cl_fraction a seeded per-UE
/// subsample of ceil(f * train size) samples.
inline ClUpload cl_upload(const ExperimentPlan& plan, const ScenarioData& data,
                          std::size_t scalar_bytes = sizeof(float), bool gather_samples = true) {
  if (plan.framework == Framework::digcsi) throw ArgumentError("cl_upload: plan is a digcsi plan");
  ClUpload out;
  out.ledger.cl_all_bytes = cl_all_bytes(data, plan.participants);
  out.fraction = plan.framework == Framework::cl_all
                     ? 1.0
                     : plan.fraction.value_or(matched_fraction(data, plan.participants, plan.zdim, scalar_bytes));
  std::vector<numeric::Tensor<float>> parts;
  for (auto id : plan.participants) {
    const auto& ds = data.ue(id);
    const auto idx = plan.framework == Framework::cl_all ? ds.train : subsample_train(ds, out.fraction, plan.seed);
    if (gather_samples) parts.push_back(channel::gather(ds.samples, idx));
    out.ledger.rows.push_back(
        {id, dataset_upload_bytes(idx.size(), data.config.subcarriers, data.config.antennas)});
  }
  if (gather_samples) {
    std::vector<const numeric::Tensor<float>*> ptrs;
    for (const auto& p : parts) ptrs.push_back(&p);
    out.training = channel::concat(ptrs);
  }
  return out;
}

template <class T>
EvaluationReport run_cl(const ExperimentPlan& plan, Workspace<T>& ws) {
  const auto& data = ws.data();
  plan.validate(data);
  if (plan.framework == Framework::digcsi) throw ArgumentError("run_cl: plan is a digcsi plan");
  EvaluationReport report;
  report.framework = plan.framework;
  report.participants = plan.participants;
  report.zdim = plan.zdim;
  report.seed = plan.seed;
  auto upload = cl_upload(plan, data, sizeof(T));
  report.ledger = upload.ledger;
  report.fraction = upload.fraction;
  detail::score_all_ratios(ws, plan, upload.training, report);
  return report;
}

template <class T>
EvaluationReport run_plan(const ExperimentPlan& plan, Workspace<T>& ws) {
  return plan.framework == Framework::digcsi ? run_digcsi(plan, ws) : run_cl(plan, ws);
}

struct SweepResult {
  std::vector<EvaluationReport> reports;  // one per plan, failed plans included
  std::vector<CellResult> cells;          // flattened grid
};

/// Runs every plan; a plan that fails outright is recorded as failed cells and
/// the sweep continues.
template <class T>
SweepResult sweep(const std::vector<ExperimentPlan>& plans, Workspace<T>& ws,
                  const std::string& config_hash = {}) {
  SweepResult out;
  for (const auto& plan : plans) {
    EvaluationReport report;
    try {
      report = run_plan(plan, ws);
    } catch (const Error& e) {
      report.framework = plan.framework;
      report.participants = plan.participants;
      report.zdim = plan.zdim;
      report.seed = plan.seed;
      for (const auto& ratio : plan.ratios) {
        CellResult cell;
        cell.framework = plan.framework;
        cell.ue_count = plan.participants.size();
        cell.ratio = ratio;
        cell.zdim = plan.zdim;
        cell.seed = plan.seed;
        cell.error = e.what();
        report.cells.push_back(std::move(cell));
      }
    }
    for (auto& c : report.cells) {
      c.config_hash = config_hash;
      out.cells.push_back(c);
    }
    out.reports.push_back(std::move(report));
  }
  return out;
}

}  // namespace digcsi::orchestrator
