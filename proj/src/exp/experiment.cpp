#include "poer/exp/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "poer/common/error.hpp"
#include "poer/exp/metrics.hpp"

namespace poer::exp {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

Arm make_arm(std::string name, const RunConfig& base,
             std::initializer_list<std::pair<const char*, std::string>> overrides) {
  Arm arm{std::move(name), base};
  for (const auto& [k, v] : overrides) set_value(arm.config, k, v);
  arm.config.name = arm.name;
  return arm;
}

std::vector<std::uint64_t> parse_seeds(std::string_view text) {
  std::vector<std::uint64_t> out;
  std::string s(text);
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) {
    std::uint64_t v = 0;
    auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (r.ec != std::errc() || r.ptr != tok.data() + tok.size()) {
      throw ConfigError("suite.seeds: bad seed '" + tok + "'");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

ExperimentSuite preset_suite(const std::string& preset, const RunConfig& base,
                             std::vector<std::uint64_t> seeds) {
  ExperimentSuite suite{preset, {}, std::move(seeds)};
  if (preset == "exp1") {
    for (const char* mu : {"0", "0.5", "1", "2"}) {
      suite.arms.push_back(make_arm(std::string("mu_") + mu, base, {{"replay.replay_ratio", mu}}));
    }
  } else if (preset == "exp2") {
    for (const char* mode : {"intrinsic", "uniform", "extrinsic", "advantage"}) {
      suite.arms.push_back(make_arm(std::string("priority_") + mode, base, {{"replay.priority", mode}}));
    }
  } else if (preset == "exp3") {
    for (const char* pd : {"1", "0.5", "0"}) {
      suite.arms.push_back(make_arm(std::string("pd_") + pd, base, {{"replay.drop_probability", pd}}));
    }
  } else if (preset == "exp4") {
    for (const char* env : {"deep_chain", "key_door_grid"}) {
      suite.arms.push_back(make_arm(std::string(env) + "_ppo_rnd", base,
                                    {{"env.name", env}, {"replay.replay_ratio", "0"}}));
      suite.arms.push_back(make_arm(std::string(env) + "_poer", base,
                                    {{"env.name", env}, {"replay.replay_ratio", "0.5"}}));
    }
  } else {
    throw ConfigError("unknown experiment preset '" + preset + "' (expected exp1..exp4)");
  }
  return suite;
}

ExperimentSuite parse_suite(std::istream& in, const fs::path& base_dir) {
  struct RawSection {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;
    std::size_t line = 0;
  };
  std::vector<RawSection> sections;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = "suite line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      sections.push_back({std::string(trim(line.substr(1, line.size() - 2))), {}, line_no});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    if (sections.empty()) throw ConfigError(where + "key outside of any section");
    sections.back().entries.emplace_back(std::string(trim(line.substr(0, eq))),
                                         std::string(trim(line.substr(eq + 1))));
  }

  std::string name = "suite", preset;
  std::vector<std::uint64_t> seeds{0};
  RunConfig base;
  for (const auto& s : sections) {
    if (s.name != "suite") continue;
    for (const auto& [k, v] : s.entries) {
      if (k == "name") {
        name = v;
      } else if (k == "seeds") {
        seeds = parse_seeds(v);
      } else if (k == "preset") {
        preset = v;
      } else if (k == "config") {
        fs::path p = v;
        base = load_config(p.is_absolute() ? p : base_dir / p);
      } else {
        throw ConfigError("suite: unknown key '" + k + "'");
      }
    }
  }
  for (const auto& s : sections) {
    if (s.name != "base") continue;
    for (const auto& [k, v] : s.entries) set_value(base, k, v);
  }

  ExperimentSuite suite;
  if (!preset.empty()) suite = preset_suite(preset, base, seeds);
  suite.name = name;
  suite.seeds = seeds;
  for (const auto& s : sections) {
    if (s.name == "suite" || s.name == "base") continue;
    if (s.name.rfind("arm ", 0) != 0) {
      throw ConfigError("suite line " + std::to_string(s.line) + ": unknown section '" + s.name + "'");
    }
    const std::string arm_name(trim(std::string_view(s.name).substr(4)));
    if (arm_name.empty()) throw ConfigError("suite line " + std::to_string(s.line) + ": arm without a name");
    auto it = std::find_if(suite.arms.begin(), suite.arms.end(),
                           [&](const Arm& a) { return a.name == arm_name; });
    if (it == suite.arms.end()) {
      suite.arms.push_back({arm_name, base});
      it = std::prev(suite.arms.end());
    }
    for (const auto& [k, v] : s.entries) set_value(it->config, k, v);
    it->config.name = arm_name;
  }
  return suite;
}

ExperimentSuite load_suite(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open suite file " + path.string());
  try {
    return parse_suite(in, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

bool ArmResult::ok() const {
  return std::all_of(seeds.begin(), seeds.end(), [](const SeedResult& s) { return s.ok; });
}

bool ExperimentResult::ok() const {
  return std::all_of(arms.begin(), arms.end(), [](const ArmResult& a) { return a.ok(); });
}

double final_metric(const std::vector<MetricsRecord>& records, const std::string& column) {
  if (records.empty()) return 0.0;
  const auto& r = records.back();
  if (column == "extrinsic_reward_mean") return r.extrinsic_reward_mean;
  if (column == "extrinsic_reward_std") return r.extrinsic_reward_std;
  if (column == "extrinsic_reward_per_step_mean") return r.extrinsic_reward_per_step_mean;
  if (column == "extrinsic_reward_per_step_std") return r.extrinsic_reward_per_step_std;
  if (column == "extrinsic_value_per_step_mean") return r.extrinsic_value_per_step_mean;
  if (column == "extrinsic_value_per_step_std") return r.extrinsic_value_per_step_std;
  throw ConfigError("unknown metric column '" + column + "'");
}

SeedResult run_single(const RunConfig& config, const fs::path& dir) {
  config.validate();
  fs::create_directories(dir);
  const auto seed = config.trainer.seed;
  const auto stem = "seed_" + std::to_string(seed);
  SeedResult result{seed, false, {}, 0.0, dir / (stem + ".csv")};
  save_config(dir / (stem + ".config"), config);

  auto tc = config.trainer;
  if (tc.checkpoint_every > 0 && tc.checkpoint_dir.empty()) tc.checkpoint_dir = dir / (stem + "_checkpoints");
  MetricsSink sink(tc.time_axis);
  trainer::Trainer trainer(tc);
  try {
    trainer.run(sink);
  } catch (...) {
    save_csv(result.csv, sink.records());  // partial metrics survive an abort
    throw;
  }
  const auto records = sink.records();
  save_csv(result.csv, records);
  result.final_extrinsic_reward = final_metric(records);
  result.ok = true;
  return result;
}

ExperimentResult run_experiment(const ExperimentSuite& suite, const fs::path& out_dir,
                                const RunOverrides& overrides, std::ostream* log) {
  ExperimentResult result;
  const auto root = out_dir / suite.name;
  for (const auto& arm : suite.arms) {
    ArmResult ar{arm.name, {}};
    for (auto seed : suite.seeds) {
      RunConfig cfg = arm.config;
      cfg.trainer.seed = seed;
      if (overrides.steps) cfg.trainer.total_steps = *overrides.steps;
      if (overrides.synchronous) cfg.trainer.synchronous = *overrides.synchronous;
      if (overrides.checkpoint_every) cfg.trainer.checkpoint_every = *overrides.checkpoint_every;
      const auto dir = root / arm.name;
      cfg.out_dir = dir;
      try {
        auto r = run_single(cfg, dir);
        if (log) *log << arm.name << " seed " << seed << ": final extrinsic reward "
                      << format_double(r.final_extrinsic_reward) << '\n';
        ar.seeds.push_back(std::move(r));
      } catch (const std::exception& e) {
        if (log) *log << arm.name << " seed " << seed << ": FAILED: " << e.what() << '\n';
        ar.seeds.push_back({seed, false, e.what(), 0.0, dir / ("seed_" + std::to_string(seed) + ".csv")});
      }
    }
    result.arms.push_back(std::move(ar));
  }
  if (!suite.arms.empty()) {
    fs::create_directories(root);
    std::ofstream out(root / "summary.csv");
    write_summary(out, result);
  }
  return result;
}

void write_summary(std::ostream& out, const ExperimentResult& result) {
  out << "arm,seeds,failed,final_median,final_mean,final_std\n";
  for (const auto& arm : result.arms) {
    std::vector<double> finals;
    std::size_t failed = 0;
    for (const auto& s : arm.seeds) {
      if (s.ok) finals.push_back(s.final_extrinsic_reward);
      else ++failed;
    }
    const auto ms = mean_std(finals);
    out << arm.name << ',' << arm.seeds.size() << ',' << failed << ','
        << format_double(finals.empty() ? 0.0 : median(finals)) << ',' << format_double(ms.mean)
        << ',' << format_double(ms.stddev) << '\n';
  }
}

// ---- comparison -----------------------------------------------------------

double median(std::vector<double> values) {
  if (values.empty()) throw UsageError("median of an empty sample");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

RankTest mann_whitney(const std::vector<double>& a, const std::vector<double>& b) {
  const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size());
  if (a.empty() || b.empty()) throw UsageError("mann_whitney: empty sample");
  std::vector<std::pair<double, int>> all;
  for (double v : a) all.emplace_back(v, 0);
  for (double v : b) all.emplace_back(v, 1);
  std::sort(all.begin(), all.end());
  const double n = n1 + n2;
  double rank_sum_a = 0.0, tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].second == 0) rank_sum_a += avg_rank;
    }
    i = j;
  }
  RankTest r;
  r.u = rank_sum_a - n1 * (n1 + 1.0) / 2.0;
  const double mu = n1 * n2 / 2.0;
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (!(var > 0.0)) return r;
  const double diff = std::abs(r.u - mu);
  const double corrected = std::max(0.0, diff - 0.5);
  r.z = (r.u >= mu ? 1.0 : -1.0) * corrected / std::sqrt(var);
  r.p_value = std::min(1.0, std::erfc(std::abs(r.z) / std::sqrt(2.0)));
  return r;
}

ComparisonReport compare_arms(
    const std::vector<std::pair<std::string, std::vector<fs::path>>>& arms, const std::string& metric,
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (arms.size() < 2) throw ConfigError("compare: need at least two arms");
  ComparisonReport report;
  report.metric = metric;
  for (const auto& [name, files] : arms) {
    if (files.size() < kMinSeedsForComparison) {
      throw ConfigError("compare: arm '" + name + "' has " + std::to_string(files.size()) +
                        " seed files; at least " + std::to_string(kMinSeedsForComparison) + " are required");
    }
    ArmSample sample{name, {}, files};
    for (const auto& f : files) {
      if (!fs::exists(f)) throw ConfigError("compare: missing CSV file " + f.string());
      sample.finals.push_back(final_metric(load_csv(f), metric));
    }
    report.arms.push_back(std::move(sample));
  }
  auto arm_by_name = [&](const std::string& n) -> const ArmSample& {
    for (const auto& a : report.arms) {
      if (a.name == n) return a;
    }
    throw ConfigError("compare: unknown arm '" + n + "'");
  };
  std::vector<std::pair<std::string, std::string>> wanted = pairs;
  if (wanted.empty()) {
    for (std::size_t i = 1; i < report.arms.size(); ++i) {
      wanted.emplace_back(report.arms[0].name, report.arms[i].name);
    }
  }
  for (const auto& [x, y] : wanted) {
    const auto& a = arm_by_name(x);
    const auto& b = arm_by_name(y);
    report.pairs.push_back({a.name, b.name, median(a.finals), median(b.finals), mann_whitney(a.finals, b.finals)});
  }
  return report;
}

std::vector<std::pair<std::string, std::vector<fs::path>>> discover_arms(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("compare: not a directory: " + dir.string());
  std::vector<std::pair<std::string, std::vector<fs::path>>> out;
  std::vector<fs::path> arm_dirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) arm_dirs.push_back(e.path());
  }
  std::sort(arm_dirs.begin(), arm_dirs.end());
  // Keep the suite's arm order (first arm is the comparison reference) when
  // the run left a summary behind.
  if (std::ifstream summary(dir / "summary.csv"); summary) {
    std::vector<std::string> order;
    std::string line;
    std::getline(summary, line);
    while (std::getline(summary, line)) order.push_back(line.substr(0, line.find(',')));
    auto rank = [&](const fs::path& p) {
      const auto it = std::find(order.begin(), order.end(), p.filename().string());
      return static_cast<std::size_t>(it - order.begin());
    };
    std::stable_sort(arm_dirs.begin(), arm_dirs.end(),
                     [&](const fs::path& a, const fs::path& b) { return rank(a) < rank(b); });
  }
  for (const auto& d : arm_dirs) {
    std::vector<fs::path> csvs;
    for (const auto& e : fs::directory_iterator(d)) {
      if (e.path().extension() == ".csv" && e.path().filename().string().rfind("seed_", 0) == 0) {
        csvs.push_back(e.path());
      }
    }
    std::sort(csvs.begin(), csvs.end());
    if (!csvs.empty()) out.emplace_back(d.filename().string(), std::move(csvs));
  }
  return out;
}

void write_report(std::ostream& out, const ComparisonReport& report) {
  out << "metric: " << report.metric << " (final value per seed)\n";
  for (const auto& a : report.arms) {
    out << "arm " << a.name << ": n=" << a.finals.size() << " median=" << format_double(median(a.finals))
        << '\n';
  }
  for (const auto& p : report.pairs) {
    out << p.a << " vs " << p.b << ": median " << format_double(p.median_a) << " vs "
        << format_double(p.median_b) << ", U=" << format_double(p.test.u)
        << ", p=" << format_double(p.test.p_value) << '\n';
  }
}

}  // namespace poer::exp
