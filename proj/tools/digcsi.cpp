// digcsi: command-line front end. See `digcsi --help`.

#include <iostream>

#include "CLI11.hpp"
#include "digcsi/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace digcsi;
  CLI::App app{"Generator-upload CSI feedback lab: datasets, local SWAE generators, global codecs"};
  app.require_subcommand(1);

  cli::Options opt;
  std::string precision, arm;
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  unsigned jobs = 0;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"gen-data", "write one dataset per UE and the scenario manifest"},
      {"train-local", "train each UE's SWAE and export its decoder as a generator"},
      {"generate", "synthesize K fake samples per uploaded generator"},
      {"train-global", "train the feedback codec of every arm and ratio"},
      {"evaluate", "score trained codecs (PNMSE/GNMSE), write report.json and results.csv"},
      {"overhead", "upload ledger of every arm"},
      {"run", "the whole pipeline in one process"}};

  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "run directory (default digcsi-run)");
    sub->add_option("--seed", seed, "master seed override");
    sub->add_option("--jobs", jobs, "cap on worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--precision", precision, "training precision")->check(CLI::IsMember({"f32", "f64"}));
    sub->add_option("--arm", arm, "restrict to one arm")->check(CLI::IsMember({"digcsi", "cl_all", "cl_fraction"}));
    if (name == "evaluate") sub->add_flag("--identity-codec", opt.identity, "debug: score H_hat = H");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::exit_code::config;
  }

  CLI::App* chosen = nullptr;
  for (auto* s : subs) {
    if (s->parsed()) chosen = s;
  }
  if (!config_path.empty()) opt.config = config_path;
  if (!out_dir.empty()) opt.out = out_dir;
  if (chosen->count("--seed")) opt.seed = seed;
  if (chosen->count("--jobs")) opt.jobs = jobs;
  if (!precision.empty()) opt.precision = cli::parse_precision(precision);
  if (!arm.empty()) opt.arm = orchestrator::parse_framework(arm);
  return cli::run_command(chosen->get_name(), opt, std::cout, std::cerr);
}
