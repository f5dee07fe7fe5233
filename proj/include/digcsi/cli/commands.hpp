#pragma once

// Subcommands of the digcsi tool. Each stage reads its predecessors' files from
// the run directory, writes its own, and prints one JSON line on stdout.
// Human-readable progress goes to the log stream (stderr in the binary).

#include <cinttypes>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "digcsi/channel/dataset_io.hpp"
#include "digcsi/cli/artifacts.hpp"
#include "digcsi/cli/config.hpp"

namespace digcsi::cli {

using orchestrator::parallel_for;

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int internal = 1;
inline constexpr int config = 2;
inline constexpr int io = 3;
inline constexpr int missing_artifact = 4;
inline constexpr int divergence = 5;
}  // namespace exit_code

struct Options {
  std::optional<fs::path> config;
  fs::path out = "digcsi-run";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::optional<Precision> precision;
  std::optional<orchestrator::Framework> arm;
  bool identity = false;  // evaluate only: bypass the codec (H_hat = H)
};

struct Context {
  RunConfig cfg;
  std::string config_text;  // as given, echoed verbatim
  fs::path out;
  std::optional<orchestrator::Framework> arm;
  bool identity = false;
  std::ostream* log = &std::cerr;
};

/// Result of a command: the stdout summary and the process exit code.
struct CommandResult {
  nlohmann::json summary;
  int exit_code = exit_code::ok;
};

// --- configuration -----------------------------------------------------------

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of everything that shapes the results except the seed and the job count.
inline std::string config_hash(const RunConfig& cfg) {
  auto j = resolved_json(cfg);
  j.erase("seed");
  j.erase("jobs");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a(j.dump()));
  return buf;
}

inline Context load_context(const Options& opt) {
  Context ctx;
  ctx.out = opt.out;
  ctx.arm = opt.arm;
  ctx.identity = opt.identity;
  json j = json::object();
  if (opt.config) {
    if (!fs::exists(*opt.config)) throw ConfigError("config file not found: " + opt.config->string());
    ctx.config_text = io::read_text(*opt.config);
    j = parse_json_text(ctx.config_text, opt.config->string());
  } else {
    ctx.config_text = "{}\n";
  }
  ctx.cfg = config_from_json(j);
  if (opt.seed) ctx.cfg.seed = *opt.seed;
  if (opt.jobs) ctx.cfg.jobs = *opt.jobs;
  if (opt.precision) ctx.cfg.precision = *opt.precision;
  ctx.cfg.base.seed = ctx.cfg.seed;
  ctx.cfg.base.jobs = ctx.cfg.jobs;
  ctx.cfg.scenario.seed = ctx.cfg.seed;
  ctx.cfg.validate();

  io::write_text(ctx.out / "config.json", ctx.config_text);
  write_json_file(ctx.out / "config.resolved.json", resolved_json(ctx.cfg));
  return ctx;
}

/// Plans of the sweep in output order: per UE count, per arm, per zdim.
/// cl_all does not depend on zdim and runs once per UE count with zdim 0.
inline std::vector<orchestrator::ExperimentPlan> expand_plans(const RunConfig& cfg,
                                                              std::optional<orchestrator::Framework> only = {}) {
  std::vector<orchestrator::ExperimentPlan> plans;
  for (auto n : cfg.ue_counts) {
    for (auto arm : cfg.arms) {
      if (only && arm != *only) continue;
      auto plan = cfg.base;
      plan.framework = arm;
      plan.participants = orchestrator::first_ues(n);
      if (arm == orchestrator::Framework::cl_all) {
        plan.zdim = 0;
        plans.push_back(plan);
        continue;
      }
      for (auto z : cfg.zdims) {
        plan.zdim = z;
        plans.push_back(plan);
      }
    }
  }
  return plans;
}

/// UEs that train generators: every participant of any plan.
inline std::vector<std::uint32_t> generator_ues(const RunConfig& cfg) {
  std::size_t n = 0;
  for (auto c : cfg.ue_counts) n = std::max(n, c);
  return orchestrator::first_ues(n);
}

inline bool runs_arm(const Context& ctx, orchestrator::Framework f) {
  if (ctx.arm && *ctx.arm != f) return false;
  for (auto a : ctx.cfg.arms) {
    if (a == f) return true;
  }
  return false;
}

template <class F>
decltype(auto) with_precision(Precision p, F&& f) {
  if (p == Precision::f64) return f.template operator()<double>();
  return f.template operator()<float>();
}

// --- datasets ----------------------------------------------------------------

inline json scenario_json(const RunConfig& cfg) {
  auto j = resolved_json(cfg).at("scenario");
  j["seed"] = cfg.seed;
  return j;
}

/// Reads every UE dataset written by gen-data, checking it was produced from
/// the same scenario.
inline orchestrator::ScenarioData load_scenario(const Context& ctx) {
  const auto manifest_path = paths::scenario_manifest(ctx.out);
  const auto manifest = read_json_file(manifest_path);
  if (manifest != scenario_json(ctx.cfg)) {
    throw ConfigError(manifest_path.string() + " was written for a different scenario or seed; rerun gen-data");
  }
  orchestrator::ScenarioData data{ctx.cfg.scenario, {}};
  data.datasets.resize(ctx.cfg.scenario.ue_count);
  parallel_for(data.datasets.size(), ctx.cfg.jobs, [&](std::size_t i) {
    data.datasets[i] = channel::read_dataset(paths::dataset(ctx.out, static_cast<std::uint32_t>(i)));
  });
  return data;
}

inline CommandResult cmd_gen_data(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  *ctx.log << "gen-data: " << cfg.scenario.ue_count << " UEs x " << cfg.scenario.snapshot_count()
           << " samples\n";
  const auto data = orchestrator::generate_scenario(cfg.scenario, cfg.jobs);
  std::uint64_t bytes = 0;
  for (const auto& ds : data.datasets) {
    channel::write_dataset(paths::dataset(ctx.out, ds.ue_id), ds);
    bytes += channel::dataset_payload_bytes(ds.count(), ds.subcarriers(), ds.antennas());
  }
  write_json_file(paths::scenario_manifest(ctx.out), scenario_json(cfg));
  return {{{"command", "gen-data"},
           {"datasets", data.datasets.size()},
           {"samples_per_ue", cfg.scenario.snapshot_count()},
           {"payload_bytes", bytes},
           {"dir", (ctx.out / "datasets").string()}}};
}

// --- UE side -----------------------------------------------------------------

inline CommandResult cmd_train_local(const Context& ctx) {
  if (!runs_arm(ctx, orchestrator::Framework::digcsi)) {
    return {{{"command", "train-local"}, {"generators", 0}, {"skipped", "digcsi arm not selected"}}};
  }
  const auto& cfg = ctx.cfg;
  const auto data = load_scenario(ctx);
  const auto ues = generator_ues(cfg);
  std::size_t written = 0;
  json failed = json::array();
  for (auto zdim : cfg.zdims) {
    const auto arch = orchestrator::local_architecture(data, zdim);
    std::vector<orchestrator::LocalRun> runs(ues.size());
    with_precision(cfg.precision, [&]<class T>() {
      parallel_for(ues.size(), cfg.jobs, [&](std::size_t i) {
        auto slot = orchestrator::Workspace<T>::train_generator(data.ue(ues[i]), arch, cfg.base.local, cfg.seed);
        const auto stem = paths::generator(ctx.out, zdim, ues[i]);
        if (slot.artifact) {
          swae::export_generator(stem, *slot.artifact);
        } else {
          fs::remove(numeric::manifest_path(stem));
          fs::remove(numeric::blob_path(stem));
        }
        runs[i] = slot.run;
      });
    });
    for (const auto& run : runs) {
      write_json_file(paths::local_log(ctx.out, zdim, run.ue_id), local_run_json(run));
      if (run.ok) {
        ++written;
      } else {
        failed.push_back({{"ue_id", run.ue_id}, {"zdim", zdim}, {"error", run.error}});
        *ctx.log << "train-local: UE " << run.ue_id << " zdim " << zdim << " failed: " << run.error << "\n";
      }
    }
    *ctx.log << "train-local: zdim " << zdim << " done\n";
  }
  CommandResult r{{{"command", "train-local"}, {"generators", written}, {"failed", failed}}};
  if (written == 0) r.exit_code = exit_code::divergence;
  return r;
}

inline orchestrator::LocalRun read_local_run(const Context& ctx, std::size_t zdim, std::uint32_t id) {
  const auto path = paths::local_log(ctx.out, zdim, id);
  try {
    return local_run_from_json(read_json_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

inline std::size_t local_sample_count(const Context& ctx) {
  const auto sidecar = channel::sidecar_path(paths::dataset(ctx.out, 0));
  try {
    return read_json_file(sidecar).at("sample_count");
  } catch (const json::exception& e) {
    throw ParseError(sidecar.string() + ": " + e.what(), 0);
  }
}

// --- server side -------------------------------------------------------------

inline CommandResult cmd_generate(const Context& ctx) {
  if (!runs_arm(ctx, orchestrator::Framework::digcsi)) {
    return {{{"command", "generate"}, {"sets", 0}, {"skipped", "digcsi arm not selected"}}};
  }
  const auto& cfg = ctx.cfg;
  const std::size_t k = cfg.base.fake_per_ue.value_or(local_sample_count(ctx));
  const auto ues = generator_ues(cfg);
  std::size_t sets = 0;
  for (auto zdim : cfg.zdims) {
    std::vector<std::uint32_t> ok;
    for (auto id : ues) {
      if (read_local_run(ctx, zdim, id).ok) ok.push_back(id);
    }
    with_precision(cfg.precision, [&]<class T>() {
      parallel_for(ok.size(), cfg.jobs, [&](std::size_t i) {
        auto artifact = swae::read_generator<T>(paths::generator(ctx.out, zdim, ok[i]));
        const auto fake = swae::generate(artifact, k, orchestrator::generation_seed(cfg.seed, ok[i], zdim));
        write_fake(paths::fake(ctx.out, zdim, ok[i]), fake, ok[i], zdim);
      });
    });
    sets += ok.size();
  }
  return {{{"command", "generate"}, {"sets", sets}, {"samples_per_set", k}}};
}

/// Server-side training set of a digcsi plan: the fake sets of its surviving
/// generators in UE order. Also fills the report's ledger and local runs.
inline numeric::Tensor<float> digcsi_upload(const Context& ctx, const orchestrator::ScenarioData& data,
                                            const orchestrator::ExperimentPlan& plan,
                                            orchestrator::EvaluationReport& report, bool load_samples) {
  std::vector<numeric::Tensor<float>> parts;
  for (auto id : plan.participants) {
    const auto run = read_local_run(ctx, plan.zdim, id);
    report.local_runs.push_back(run);
    if (!run.ok) {
      report.failed_ues.push_back(id);
      continue;
    }
    const auto stem = paths::generator(ctx.out, plan.zdim, id);
    const auto manifest = numeric::read_manifest(stem);
    report.ledger.rows.push_back({id, manifest.at("total_bytes").get<std::uint64_t>()});
    if (load_samples) parts.push_back(read_fake(paths::fake(ctx.out, plan.zdim, id)));
  }
  report.ledger.cl_all_bytes = orchestrator::cl_all_bytes(data, plan.participants);
  report.fraction = report.ledger.proportion();
  if (report.ledger.rows.empty()) {
    throw DivergenceError("digcsi: local training diverged for every participating UE");
  }
  if (!load_samples) return {};
  std::vector<const numeric::Tensor<float>*> ptrs;
  for (const auto& p : parts) ptrs.push_back(&p);
  return channel::concat(ptrs);
}

inline orchestrator::EvaluationReport empty_report(const orchestrator::ExperimentPlan& plan) {
  orchestrator::EvaluationReport report;
  report.framework = plan.framework;
  report.participants = plan.participants;
  report.zdim = plan.zdim;
  report.seed = plan.seed;
  return report;
}

/// Training set and ledger of one plan as the server would see them.
inline numeric::Tensor<float> plan_upload(const Context& ctx, const orchestrator::ScenarioData& data,
                                          const orchestrator::ExperimentPlan& plan,
                                          orchestrator::EvaluationReport& report, bool load_samples) {
  if (plan.framework == orchestrator::Framework::digcsi) {
    return digcsi_upload(ctx, data, plan, report, load_samples);
  }
  const std::size_t scalar_bytes = ctx.cfg.precision == Precision::f64 ? sizeof(double) : sizeof(float);
  auto upload = orchestrator::cl_upload(plan, data, scalar_bytes, load_samples);
  report.ledger = upload.ledger;
  report.fraction = upload.fraction;
  return std::move(upload.training);
}

inline CommandResult cmd_train_global(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto data = load_scenario(ctx);
  const auto plans = expand_plans(cfg, ctx.arm);
  std::size_t trained = 0, failed = 0;
  for (const auto& plan : plans) {
    auto report = empty_report(plan);
    numeric::Tensor<float> training;
    std::string plan_error;
    try {
      training = plan_upload(ctx, data, plan, report, true);
    } catch (const DivergenceError& e) {
      plan_error = e.what();
    } catch (const ArgumentError& e) {
      plan_error = e.what();
    }
    for (const auto& ratio : plan.ratios) {
      const auto log_path = paths::global_log(ctx.out, plan, ratio);
      const auto stem = paths::codec(ctx.out, plan, ratio);
      if (!plan_error.empty()) {
        write_json_file(log_path, codec_log_json(false, plan_error, 0, {}));
        ++failed;
        continue;
      }
      *ctx.log << "train-global: " << paths::cell_tag(plan.framework, plan.participants.size(), plan.zdim, ratio)
               << " on " << training.dim(0) << " samples\n";
      with_precision(cfg.precision, [&]<class T>() {
        try {
          const auto arch = orchestrator::codec_architecture(plan, data, ratio);
          auto result = codec::train_codec<T>(training, arch, plan.global,
                                              orchestrator::codec_seed(plan.seed, ratio, plan.participants.size()));
          codec::write_codec(stem, result.codec, ratio,
                             {{"arm", orchestrator::framework_name(plan.framework)},
                              {"ue_count", plan.participants.size()},
                              {"zdim", plan.zdim}});
          write_json_file(log_path, codec_log_json(true, "", training.dim(0), result.log));
          ++trained;
        } catch (const Error& e) {
          if (dynamic_cast<const IoError*>(&e)) throw;
          fs::remove(numeric::manifest_path(stem));
          fs::remove(numeric::blob_path(stem));
          write_json_file(log_path, codec_log_json(false, e.what(), training.dim(0), {}));
          ++failed;
        }
      });
    }
  }
  CommandResult r{{{"command", "train-global"}, {"codecs", trained}, {"failed", failed}}};
  if (trained == 0 && failed > 0) r.exit_code = exit_code::divergence;
  return r;
}

// --- accounting and evaluation ------------------------------------------------

inline json ledger_json(const orchestrator::EvaluationReport& r) {
  json rows = json::array();
  for (const auto& row : r.ledger.rows) rows.push_back({{"ue_id", row.ue_id}, {"upload_bytes", row.upload_bytes}});
  return {{"framework", orchestrator::framework_name(r.framework)},
          {"ue_count", r.participants.size()},
          {"zdim", r.zdim},
          {"fraction", r.fraction},
          {"rows", rows},
          {"total_bytes", r.ledger.total_bytes()},
          {"cl_all_bytes", r.ledger.cl_all_bytes},
          {"proportion", r.ledger.proportion()}};
}

inline CommandResult cmd_overhead(const Context& ctx) {
  const auto data = load_scenario(ctx);
  json plans = json::array();
  for (const auto& plan : expand_plans(ctx.cfg, ctx.arm)) {
    auto report = empty_report(plan);
    try {
      plan_upload(ctx, data, plan, report, false);
    } catch (const DivergenceError& e) {
      auto j = ledger_json(report);
      j["error"] = e.what();
      plans.push_back(j);
      continue;
    }
    plans.push_back(ledger_json(report));
  }
  write_json_file(ctx.out / "overhead.json", {{"plans", plans}});
  json compact = json::array();
  for (const auto& p : plans) {
    json c = p;
    c.erase("rows");
    compact.push_back(c);
  }
  return {{{"command", "overhead"}, {"plans", compact}}};
}

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline const char* kResultsHeader =
    "framework,ue_count,ratio,zdim,pnmse_db,gnmse_db,upload_bytes_total,proportion,seed";

inline std::string results_csv(const std::vector<orchestrator::CellResult>& cells) {
  std::ostringstream os;
  os << kResultsHeader << "\n";
  for (const auto& c : cells) {
    os << orchestrator::framework_name(c.framework) << "," << c.ue_count << "," << c.ratio.str() << "," << c.zdim
       << "," << format_double(c.ok ? c.pnmse_db : std::nan("")) << ","
       << format_double(c.ok ? c.gnmse_db : std::nan("")) << "," << c.upload_bytes_total << ","
       << format_double(c.proportion) << "," << c.seed << "\n";
  }
  return os.str();
}

inline json cell_json(const orchestrator::CellResult& c) {
  json log = json::array();
  for (const auto& e : c.log) log.push_back(e.loss);
  return {{"framework", orchestrator::framework_name(c.framework)},
          {"ue_count", c.ue_count},
          {"ratio", c.ratio.str()},
          {"zdim", c.zdim},
          {"ok", c.ok},
          {"error", c.error},
          {"pnmse_db", c.ok ? json(c.pnmse_db) : json(nullptr)},
          {"gnmse_db", c.ok ? json(c.gnmse_db) : json(nullptr)},
          {"upload_bytes_total", c.upload_bytes_total},
          {"proportion", c.proportion},
          {"training_samples", c.training_samples},
          {"seed", c.seed},
          {"config_hash", c.config_hash},
          {"epoch_losses", log}};
}

inline json report_json(const Context& ctx, const std::vector<orchestrator::EvaluationReport>& reports) {
  json plans = json::array(), cells = json::array();
  for (const auto& r : reports) {
    auto p = ledger_json(r);
    p["failed_ues"] = r.failed_ues;
    json locals = json::array();
    for (const auto& run : r.local_runs) {
      locals.push_back({{"ue_id", run.ue_id},
                        {"ok", run.ok},
                        {"error", run.error},
                        {"final_reconstruction", run.final_reconstruction},
                        {"generator_bytes", run.generator_bytes}});
    }
    p["local_runs"] = locals;
    plans.push_back(p);
    for (const auto& c : r.cells) cells.push_back(cell_json(c));
  }
  return {{"config_hash", config_hash(ctx.cfg)},
          {"seed", ctx.cfg.seed},
          {"config", resolved_json(ctx.cfg)},
          {"plans", plans},
          {"cells", cells}};
}

inline CommandResult finish_report(const Context& ctx, const char* command,
                                   const std::vector<orchestrator::EvaluationReport>& reports) {
  std::vector<orchestrator::CellResult> cells;
  for (const auto& r : reports) cells.insert(cells.end(), r.cells.begin(), r.cells.end());
  write_json_file(ctx.out / "report.json", report_json(ctx, reports));
  io::write_text(ctx.out / "results.csv", results_csv(cells));
  std::size_t ok = 0;
  json brief = json::array();
  for (const auto& c : cells) {
    ok += c.ok ? 1 : 0;
    brief.push_back({{"framework", orchestrator::framework_name(c.framework)},
                     {"ue_count", c.ue_count},
                     {"ratio", c.ratio.str()},
                     {"zdim", c.zdim},
                     {"pnmse_db", c.ok ? json(c.pnmse_db) : json(nullptr)},
                     {"gnmse_db", c.ok ? json(c.gnmse_db) : json(nullptr)}});
  }
  CommandResult r{{{"command", command},
                   {"cells", cells.size()},
                   {"failed", cells.size() - ok},
                   {"config_hash", config_hash(ctx.cfg)},
                   {"results", (ctx.out / "results.csv").string()},
                   {"grid", brief}}};
  if (ok == 0 && !cells.empty()) r.exit_code = exit_code::divergence;
  return r;
}

inline orchestrator::CellResult blank_cell(const orchestrator::ExperimentPlan& plan, codec::Ratio ratio,
                                           const std::string& hash) {
  orchestrator::CellResult cell;
  cell.framework = plan.framework;
  cell.ue_count = plan.participants.size();
  cell.ratio = ratio;
  cell.zdim = plan.zdim;
  cell.seed = plan.seed;
  cell.config_hash = hash;
  return cell;
}

inline CommandResult cmd_evaluate(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto data = load_scenario(ctx);
  const auto hash = config_hash(cfg);
  std::vector<orchestrator::EvaluationReport> reports;
  with_precision(cfg.precision, [&]<class T>() {
    orchestrator::Workspace<T> ws(data);
    for (const auto& plan : expand_plans(cfg, ctx.arm)) {
      auto report = empty_report(plan);
      std::string plan_error;
      try {
        plan_upload(ctx, data, plan, report, false);
      } catch (const DivergenceError& e) {
        plan_error = e.what();
      } catch (const ArgumentError& e) {
        plan_error = e.what();
      }
      for (const auto& ratio : plan.ratios) {
        auto cell = blank_cell(plan, ratio, hash);
        cell.upload_bytes_total = report.ledger.total_bytes();
        cell.proportion = report.ledger.proportion();
        if (!plan_error.empty()) {
          cell.error = plan_error;
          report.cells.push_back(cell);
          continue;
        }
        if (ctx.identity) {
          const auto s = orchestrator::evaluate<T>(nullptr, ws.test_set(plan.participants), ws.global_test_set(), true);
          cell.pnmse_db = s.pnmse_db;
          cell.gnmse_db = s.gnmse_db;
          cell.ok = true;
          report.cells.push_back(cell);
          continue;
        }
        const auto log = read_json_file(paths::global_log(ctx.out, plan, ratio));
        cell.training_samples = log.value("training_samples", std::size_t{0});
        if (!log.value("ok", false)) {
          cell.error = log.value("error", std::string("codec training failed"));
          report.cells.push_back(cell);
          continue;
        }
        for (const auto& e : log.at("epochs")) cell.log.push_back({e.at("epoch"), e.at("loss")});
        auto model = codec::read_codec<T>(paths::codec(ctx.out, plan, ratio));
        const auto s = orchestrator::evaluate(&model, ws.test_set(plan.participants), ws.global_test_set());
        cell.pnmse_db = s.pnmse_db;
        cell.gnmse_db = s.gnmse_db;
        cell.ok = true;
        report.cells.push_back(cell);
      }
      reports.push_back(std::move(report));
    }
  });
  return finish_report(ctx, "evaluate", reports);
}

/// Everything in one process: datasets, generators, synthesis, codecs, scores.
inline CommandResult cmd_run(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  *ctx.log << "run: generating " << cfg.scenario.ue_count << " UE datasets\n";
  const auto data = orchestrator::generate_scenario(cfg.scenario, cfg.jobs);
  const auto plans = expand_plans(cfg, ctx.arm);
  const auto hash = config_hash(cfg);
  std::vector<orchestrator::EvaluationReport> reports;
  with_precision(cfg.precision, [&]<class T>() {
    orchestrator::Workspace<T> ws(data);
    for (const auto& plan : plans) {
      *ctx.log << "run: " << orchestrator::framework_name(plan.framework) << " with "
               << plan.participants.size() << " UEs, zdim " << plan.zdim << "\n";
      auto result = orchestrator::sweep<T>({plan}, ws, hash);
      reports.push_back(std::move(result.reports.front()));
    }
  });
  std::set<std::pair<std::size_t, std::uint32_t>> logged;
  for (const auto& r : reports) {
    for (const auto& run : r.local_runs) {
      if (logged.insert({run.zdim, run.ue_id}).second) {
        write_json_file(paths::local_log(ctx.out, run.zdim, run.ue_id), local_run_json(run));
      }
    }
    const auto plan_like = [&] {
      orchestrator::ExperimentPlan p;
      p.framework = r.framework;
      p.participants = r.participants;
      p.zdim = r.zdim;
      return p;
    }();
    for (const auto& c : r.cells) {
      write_json_file(paths::global_log(ctx.out, plan_like, c.ratio),
                      codec_log_json(c.ok, c.error, c.training_samples, c.log));
    }
  }
  return finish_report(ctx, "run", reports);
}

// --- dispatch -----------------------------------------------------------------

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"gen-data", "train-local", "generate", "train-global",
                                              "evaluate", "overhead",    "run"};
  return names;
}

inline CommandResult dispatch(const std::string& command, const Context& ctx) {
  if (command == "gen-data") return cmd_gen_data(ctx);
  if (command == "train-local") return cmd_train_local(ctx);
  if (command == "generate") return cmd_generate(ctx);
  if (command == "train-global") return cmd_train_global(ctx);
  if (command == "evaluate") return cmd_evaluate(ctx);
  if (command == "overhead") return cmd_overhead(ctx);
  if (command == "run") return cmd_run(ctx);
  throw ConfigError("unknown command '" + command + "'");
}

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ArgumentError*>(&e)) return exit_code::config;
  if (dynamic_cast<const MissingArtifactError*>(&e)) return exit_code::missing_artifact;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const ParseError*>(&e)) return exit_code::io;
  if (dynamic_cast<const DivergenceError*>(&e)) return exit_code::divergence;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return exit_code::io;
  return exit_code::internal;
}

/// Runs one command, printing its JSON summary to `out` and diagnostics to `err`.
inline int run_command(const std::string& command, const Options& opt, std::ostream& out, std::ostream& err) {
  try {
    auto ctx = load_context(opt);
    ctx.log = &err;
    const auto result = dispatch(command, ctx);
    out << result.summary.dump() << std::endl;
    return result.exit_code;
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    json j = {{"command", command}, {"error", e.what()}, {"exit_code", code}};
    if (const auto* m = dynamic_cast<const MissingArtifactError*>(&e)) j["missing"] = m->path();
    err << "digcsi " << command << ": " << e.what() << "\n";
    out << j.dump() << std::endl;
    return code;
  }
}

}  // namespace digcsi::cli
