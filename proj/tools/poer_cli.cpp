// Command-line front end: train one configuration, run an ablation suite, or
// compare finished arms.
#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "poer/common/error.hpp"
#include "poer/exp/config.hpp"
#include "poer/exp/experiment.hpp"
#include "poer/exp/metrics.hpp"

namespace fs = std::filesystem;
using namespace poer;

namespace {

constexpr int kExitRunFailed = 1;
constexpr int kExitBadInput = 2;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::uint64_t> steps;
  bool sync = false;
  std::optional<std::uint64_t> checkpoint_every;
};

void add_common(CLI::App* cmd, CommonFlags& f, const char* config_help) {
  cmd->add_option("--config", f.config, config_help);
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--steps", f.steps, "Environment step budget per run");
  cmd->add_flag("--sync", f.sync, "Deterministic synchronous mode");
  cmd->add_option("--checkpoint-every", f.checkpoint_every, "Write a checkpoint every N updates");
}

int run_train(const CommonFlags& f, bool print_config) {
  exp::RunConfig cfg = f.config.empty() ? exp::RunConfig{} : exp::load_config(f.config);
  if (f.seed) cfg.trainer.seed = *f.seed;
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.steps) cfg.trainer.total_steps = *f.steps;
  if (f.sync) cfg.trainer.synchronous = true;
  if (f.checkpoint_every) cfg.trainer.checkpoint_every = *f.checkpoint_every;
  cfg.validate();
  if (print_config) {
    exp::write_config(std::cout, cfg);
    return 0;
  }
  const auto dir = cfg.out_dir / cfg.name;
  try {
    const auto r = exp::run_single(cfg, dir);
    std::cout << "wrote " << r.csv.string() << "\nfinal extrinsic reward (window mean): "
              << exp::format_double(r.final_extrinsic_reward) << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "run aborted: " << e.what() << '\n';
    return kExitRunFailed;
  }
}

int run_suite(const CommonFlags& f, const std::string& preset) {
  exp::ExperimentSuite suite;
  if (!f.config.empty()) {
    suite = exp::load_suite(f.config);
  } else if (!preset.empty()) {
    suite = exp::preset_suite(preset, exp::RunConfig{}, {0, 1, 2, 3, 4});
  } else {
    throw ConfigError("experiment: give a suite file with --config or a --preset");
  }
  if (f.seed) suite.seeds = {*f.seed};
  exp::RunOverrides overrides;
  overrides.steps = f.steps;
  if (f.sync) overrides.synchronous = true;
  overrides.checkpoint_every = f.checkpoint_every;
  const fs::path out = f.out.empty() ? fs::path("runs") : fs::path(f.out);
  const auto result = exp::run_experiment(suite, out, overrides, &std::cout);
  exp::write_summary(std::cout, result);
  if (!result.ok()) {
    std::cerr << "one or more arms aborted\n";
    return kExitRunFailed;
  }
  return 0;
}

int run_compare(const std::vector<std::string>& paths, const std::string& metric,
                const std::vector<std::string>& pair_specs) {
  std::vector<std::pair<std::string, std::vector<fs::path>>> arms;
  if (paths.size() == 1 && fs::is_directory(paths[0]) && !exp::discover_arms(paths[0]).empty()) {
    arms = exp::discover_arms(paths[0]);
  } else {
    for (const auto& p : paths) {
      if (!fs::is_directory(p)) throw ConfigError("compare: not a directory: " + p);
      std::vector<fs::path> csvs;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.path().extension() == ".csv" && e.path().filename().string().rfind("seed_", 0) == 0) {
          csvs.push_back(e.path());
        }
      }
      std::sort(csvs.begin(), csvs.end());
      arms.emplace_back(fs::path(p).filename().string(), std::move(csvs));
    }
  }
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& s : pair_specs) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw ConfigError("--pair expects A:B, got '" + s + "'");
    pairs.emplace_back(s.substr(0, colon), s.substr(colon + 1));
  }
  exp::write_report(std::cout, exp::compare_arms(arms, metric, pairs));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PPO + RND with prioritized oversampled experience replay"};
  app.require_subcommand(1);

  CommonFlags train_flags;
  bool print_config = false;
  auto* train = app.add_subcommand("train", "Train one run configuration");
  add_common(train, train_flags, "Run configuration file");
  train->add_flag("--print-config", print_config, "Print the effective configuration and exit");

  CommonFlags suite_flags;
  std::string preset;
  auto* experiment = app.add_subcommand("experiment", "Run every arm and seed of a suite");
  add_common(experiment, suite_flags, "Suite file");
  experiment->add_option("--preset", preset, "Built-in suite with default settings (exp1..exp4)");

  std::vector<std::string> compare_paths;
  std::string metric = "extrinsic_reward_mean";
  std::vector<std::string> pair_specs;
  auto* compare = app.add_subcommand("compare", "Rank-test final metrics between arms");
  compare->add_option("paths", compare_paths,
                      "An experiment directory, or one directory of seed CSVs per arm")
      ->required();
  compare->add_option("--metric", metric, "CSV column compared at its final row");
  compare->add_option("--pair", pair_specs, "Arm pair A:B to test (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run_train(train_flags, print_config);
    if (*experiment) return run_suite(suite_flags, preset);
    if (*compare) return run_compare(compare_paths, metric, pair_specs);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRunFailed;
  }
  return 0;
}
