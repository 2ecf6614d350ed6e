#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "poer/exp/config.hpp"

namespace poer::exp {

struct Arm {
  std::string name;
  RunConfig config;
};

struct ExperimentSuite {
  std::string name = "suite";
  std::vector<Arm> arms;
  std::vector<std::uint64_t> seeds;
};

// Presets mirroring the ablations, each arm a copy of `base` with only the
// swept keys changed:
//   exp1: replay.replay_ratio in {0, 0.5, 1, 2}
//   exp2: replay.priority in {intrinsic, uniform, extrinsic, advantage}
//   exp3: replay.drop_probability in {1, 0.5, 0}
//   exp4: env.name x {ppo_rnd (mu = 0), poer (mu = 0.5)}
ExperimentSuite preset_suite(const std::string& preset, const RunConfig& base,
                             std::vector<std::uint64_t> seeds);

// Suite file:
//   [suite]   name, seeds (comma separated), preset (optional), config
//             (optional base RunConfig path, relative to the suite file)
//   [base]    dotted overrides applied to the base config
//   [arm X]   dotted overrides for arm X (adds to / replaces preset arms)
ExperimentSuite parse_suite(std::istream& in, const std::filesystem::path& base_dir = {});
ExperimentSuite load_suite(const std::filesystem::path& path);

struct RunOverrides {
  std::optional<std::uint64_t> steps;
  std::optional<bool> synchronous;
  std::optional<std::uint64_t> checkpoint_every;
};

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double final_extrinsic_reward = 0.0;
  std::filesystem::path csv;
};

struct ArmResult {
  std::string name;
  std::vector<SeedResult> seeds;
  bool ok() const;
};

struct ExperimentResult {
  std::vector<ArmResult> arms;
  bool ok() const;
};

// Final value of `column` in a metrics series: its last row, or 0 when no
// episode finished.
double final_metric(const std::vector<MetricsRecord>& records,
                    const std::string& column = "extrinsic_reward_mean");

// Runs one arm/seed pair: trains, writes <dir>/seed_<n>.csv and the
// effective config. Throws on failure.
SeedResult run_single(const RunConfig& config, const std::filesystem::path& dir);

// Writes <out>/<suite>/<arm>/seed_<n>.csv per run plus summary.csv. A failing
// run is recorded and the remaining runs continue.
ExperimentResult run_experiment(const ExperimentSuite& suite, const std::filesystem::path& out_dir,
                                const RunOverrides& overrides = {}, std::ostream* log = nullptr);

void write_summary(std::ostream& out, const ExperimentResult& result);

// ---- comparison -----------------------------------------------------------

struct RankTest {
  double u = 0.0;        // Mann-Whitney U of the first sample
  double z = 0.0;
  double p_value = 1.0;  // two-sided, normal approximation with tie correction
};
RankTest mann_whitney(const std::vector<double>& a, const std::vector<double>& b);

double median(std::vector<double> values);

struct ArmSample {
  std::string name;
  std::vector<double> finals;
  std::vector<std::filesystem::path> files;
};

struct PairResult {
  std::string a, b;
  double median_a = 0.0, median_b = 0.0;
  RankTest test;
};

struct ComparisonReport {
  std::string metric;
  std::vector<ArmSample> arms;
  std::vector<PairResult> pairs;
};

inline constexpr std::size_t kMinSeedsForComparison = 5;

// Loads every CSV (grouped by arm), takes each file's final `metric`, and
// compares the requested pairs (all pairs against the first arm if none).
// Throws ConfigError for a missing file or fewer than five seeds per arm.
ComparisonReport compare_arms(const std::vector<std::pair<std::string, std::vector<std::filesystem::path>>>& arms,
                              const std::string& metric = "extrinsic_reward_mean",
                              const std::vector<std::pair<std::string, std::string>>& pairs = {});

// Arm directories under an experiment output directory, each with its seed
// CSVs, in suite order when summary.csv is present (else by name).
std::vector<std::pair<std::string, std::vector<std::filesystem::path>>> discover_arms(
    const std::filesystem::path& experiment_dir);

void write_report(std::ostream& out, const ComparisonReport& report);

}  // namespace poer::exp
