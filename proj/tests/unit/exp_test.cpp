#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "poer/common/error.hpp"
#include "poer/exp/config.hpp"
#include "poer/exp/experiment.hpp"
#include "poer/exp/metrics.hpp"

using namespace poer;
using namespace poer::exp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("poer_exp_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig tiny_run() {
  RunConfig c;
  c.trainer.worker_count = 1;
  c.trainer.synchronous = true;
  c.trainer.total_steps = 600;
  c.trainer.batch_size = 8;
  c.trainer.super_batch_size = 4;
  c.trainer.hidden_units = 8;
  c.trainer.rnd_hidden_units = 8;
  c.trainer.rnd_feature_length = 4;
  c.trainer.env.chain_length = 4;
  c.trainer.env.wrapper.max_episode_steps = 20;
  c.trainer.time_axis = TimeAxis::kSteps;
  return c;
}

}  // namespace

TEST(Metrics, SingleEpisodeArithmetic) {
  MetricsSink sink;
  auto r = sink.record({1.0, 10, 0.5}, 3, 10);
  EXPECT_EQ(r.extrinsic_reward_mean, 1.0);
  EXPECT_DOUBLE_EQ(r.extrinsic_reward_per_step_mean, 0.1);
  EXPECT_EQ(r.extrinsic_value_per_step_mean, 0.5);
  EXPECT_EQ(r.extrinsic_reward_std, 0.0);
  EXPECT_EQ(r.time_axis, 3.0);
}

TEST(Metrics, ConstantSeriesHasZeroStd) {
  MetricsSink sink(TimeAxis::kSteps);
  MetricsRecord r;
  for (int i = 0; i < 80; ++i) r = sink.record({0.25, 4, 0.1}, 0, i);
  EXPECT_EQ(r.extrinsic_reward_std, 0.0);
  EXPECT_EQ(r.extrinsic_reward_per_step_std, 0.0);
  EXPECT_EQ(r.time_axis, 79.0);
}

TEST(Metrics, WindowMatchesTwoPassOracle) {
  MetricsSink sink(TimeAxis::kUpdates, 50);
  poer::Rng rng(3);
  std::vector<EpisodeSummary> all;
  for (int i = 0; i < 173; ++i) {
    EpisodeSummary e{rng.uniform() * 2 - 1, 1 + rng.uniform_index(30), rng.normal()};
    all.push_back(e);
    auto r = sink.record(e, i, 0);
    const std::size_t lo = all.size() > 50 ? all.size() - 50 : 0;
    double m = 0.0;
    for (std::size_t k = lo; k < all.size(); ++k) m += all[k].extrinsic_reward;
    m /= double(all.size() - lo);
    double v = 0.0;
    for (std::size_t k = lo; k < all.size(); ++k) v += std::pow(all[k].extrinsic_reward - m, 2);
    v = std::sqrt(v / double(all.size() - lo));
    ASSERT_NEAR(r.extrinsic_reward_mean, m, 1e-9);
    ASSERT_NEAR(r.extrinsic_reward_std, v, 1e-9);
  }
  EXPECT_EQ(sink.episodes().size(), 173u);
}

TEST(Metrics, TimeMustNotGoBackwards) {
  MetricsSink sink;
  sink.record({}, 5, 0);
  EXPECT_THROW(sink.record({}, 4, 0), UsageError);
}

TEST(Csv, RoundTripIsExact) {
  std::vector<MetricsRecord> recs;
  poer::Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    recs.push_back({double(i), std::uint64_t(i), std::uint64_t(i) * 64, rng.normal(), rng.uniform(),
                    1.0 / 3.0, 1e-300, -0.0, rng.normal() * 1e10});
  }
  std::stringstream ss;
  write_csv(ss, recs);
  EXPECT_EQ(parse_csv(ss), recs);
}

TEST(Csv, HeaderAndErrors) {
  std::stringstream ss;
  write_csv(ss, {});
  EXPECT_EQ(ss.str(), std::string(kCsvHeader) + "\n");
  std::stringstream bad("nope\n");
  EXPECT_THROW(parse_csv(bad), ConfigError);
  std::stringstream short_row(std::string(kCsvHeader) + "\n1,2,3\n");
  EXPECT_THROW(parse_csv(short_row), ConfigError);
  EXPECT_THROW(load_csv("/nonexistent/poer.csv"), ConfigError);
}

TEST(Config, DefaultsAreTheDefaultArm) {
  RunConfig c;
  EXPECT_EQ(c.trainer.replay.replay_ratio, 0.5);
  EXPECT_EQ(c.trainer.replay.drop_probability, 1.0);
  EXPECT_EQ(c.trainer.replay.capacity, 128u);
  EXPECT_EQ(c.trainer.super_batch_size, 64u);
  EXPECT_EQ(c.trainer.batch_size, 64u);
  EXPECT_EQ(c.trainer.rnd_dropout, 0.5);
  EXPECT_EQ(c.trainer.loss.critic_coef, 0.5);
}

TEST(Config, RoundTrip) {
  RunConfig c = tiny_run();
  c.name = "arm x";
  c.trainer.adam.learning_rate = 0.1 + 0.2;  // not exactly representable in short decimal
  c.trainer.replay.priority_mode = replay::PriorityMode::kAdvantage;
  c.trainer.env.name = "key_door_grid";
  c.trainer.env.grid.key_bonus = true;
  std::stringstream ss;
  write_config(ss, c);
  auto back = parse_config(ss);
  EXPECT_EQ(back, c);
  EXPECT_EQ(to_text(back), to_text(c));
  EXPECT_EQ(back.trainer.adam.learning_rate, 0.1 + 0.2);
}

TEST(Config, ParsesSectionsAndComments) {
  std::stringstream ss(
      "# comment\n[replay]\nreplay_ratio = 2   # trailing\npriority=uniform\n\n[env]\nchain_length = 12\n");
  auto c = parse_config(ss);
  EXPECT_EQ(c.trainer.replay.replay_ratio, 2.0);
  EXPECT_EQ(c.trainer.replay.priority_mode, replay::PriorityMode::kUniform);
  EXPECT_EQ(c.trainer.env.chain_length, 12);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  std::stringstream unknown("[replay]\nalpha = 0.6\n");
  try {
    parse_config(unknown);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("replay.alpha"), std::string::npos);
  }
  std::stringstream section("[nope]\nx = 1\n");
  EXPECT_THROW(parse_config(section), ConfigError);
  std::stringstream value("[run]\nsteps = many\n");
  EXPECT_THROW(parse_config(value), ConfigError);
  std::stringstream orphan("steps = 3\n");
  EXPECT_THROW(parse_config(orphan), ConfigError);
  std::stringstream boolean("[run]\nsynchronous = yes\n");
  EXPECT_THROW(parse_config(boolean), ConfigError);
}

TEST(Suite, PresetArms) {
  RunConfig base;
  auto e1 = preset_suite("exp1", base, {0, 1});
  ASSERT_EQ(e1.arms.size(), 4u);
  std::vector<double> mus;
  for (const auto& a : e1.arms) mus.push_back(a.config.trainer.replay.replay_ratio);
  EXPECT_EQ(mus, (std::vector<double>{0, 0.5, 1, 2}));
  auto e3 = preset_suite("exp3", base, {0});
  std::vector<double> pds;
  for (const auto& a : e3.arms) pds.push_back(a.config.trainer.replay.drop_probability);
  EXPECT_EQ(pds, (std::vector<double>{1, 0.5, 0}));
  auto e2 = preset_suite("exp2", base, {0});
  EXPECT_EQ(e2.arms[1].config.trainer.replay.priority_mode, replay::PriorityMode::kUniform);
  auto e4 = preset_suite("exp4", base, {0});
  EXPECT_EQ(e4.arms.size(), 4u);
  EXPECT_THROW(preset_suite("exp9", base, {0}), ConfigError);
}

TEST(Suite, ArmsDifferOnlyInSweptKey) {
  RunConfig base;
  auto e1 = preset_suite("exp1", base, {0});
  for (const auto& arm : e1.arms) {
    for (const auto& key : config_keys()) {
      if (key == "replay.replay_ratio" || key == "run.name") continue;
      EXPECT_EQ(get_value(arm.config, key), get_value(base, key)) << arm.name << " " << key;
    }
  }
}

TEST(Suite, ParseFile) {
  auto dir = scratch("suite");
  {
    std::ofstream cfg(dir / "base.ini");
    cfg << "[env]\nchain_length = 9\n";
    std::ofstream suite(dir / "s.suite");
    suite << "[suite]\nname = demo\nseeds = 3, 4,5\npreset = exp3\nconfig = base.ini\n"
             "[base]\nrun.steps = 77\n[arm pd_0]\nenv.chain_length = 5\n[arm extra]\nreplay.replay_ratio = 1\n";
  }
  auto s = load_suite(dir / "s.suite");
  EXPECT_EQ(s.name, "demo");
  EXPECT_EQ(s.seeds, (std::vector<std::uint64_t>{3, 4, 5}));
  ASSERT_EQ(s.arms.size(), 4u);
  EXPECT_EQ(s.arms[0].config.trainer.env.chain_length, 9);
  EXPECT_EQ(s.arms[0].config.trainer.total_steps, 77u);
  EXPECT_EQ(s.arms[2].name, "pd_0");
  EXPECT_EQ(s.arms[2].config.trainer.env.chain_length, 5);
  EXPECT_EQ(s.arms[2].config.trainer.replay.drop_probability, 0.0);
  EXPECT_EQ(s.arms[3].name, "extra");
  EXPECT_EQ(s.arms[3].config.trainer.replay.replay_ratio, 1.0);
  std::stringstream bad("[suite]\ncolour = red\n");
  EXPECT_THROW(parse_suite(bad), ConfigError);
  fs::remove_all(dir);
}

TEST(RunExperiment, EmptySuite) {
  auto dir = scratch("empty");
  ExperimentSuite suite;
  auto r = run_experiment(suite, dir);
  EXPECT_TRUE(r.ok());
  EXPECT_TRUE(r.arms.empty());
  fs::remove_all(dir);
}

TEST(RunExperiment, WritesCsvPerArmAndSeed) {
  auto dir = scratch("run");
  auto suite = preset_suite("exp1", tiny_run(), {1, 2});
  suite.arms.resize(2);
  auto r = run_experiment(suite, dir);
  ASSERT_TRUE(r.ok());
  for (const auto& arm : {"mu_0", "mu_0.5"}) {
    for (int seed : {1, 2}) {
      const auto csv = dir / "exp1" / arm / ("seed_" + std::to_string(seed) + ".csv");
      ASSERT_TRUE(fs::exists(csv)) << csv;
      EXPECT_FALSE(load_csv(csv).empty());
      auto cfg = load_config(dir / "exp1" / arm / ("seed_" + std::to_string(seed) + ".config"));
      EXPECT_EQ(cfg.trainer.seed, std::uint64_t(seed));
    }
  }
  std::ifstream summary(dir / "exp1" / "summary.csv");
  std::string header;
  std::getline(summary, header);
  EXPECT_EQ(header, "arm,seeds,failed,final_median,final_mean,final_std");
  fs::remove_all(dir);
}

TEST(RunExperiment, FailedArmDoesNotStopOthers) {
  auto dir = scratch("fail");
  ExperimentSuite suite;
  suite.name = "f";
  suite.seeds = {0};
  auto bad = tiny_run();
  bad.trainer.env.name = "no_such_env";
  suite.arms = {{"bad", bad}, {"good", tiny_run()}};
  auto r = run_experiment(suite, dir);
  EXPECT_FALSE(r.ok());
  EXPECT_FALSE(r.arms[0].ok());
  EXPECT_NE(r.arms[0].seeds[0].error.find("no_such_env"), std::string::npos);
  EXPECT_TRUE(r.arms[1].ok());
  fs::remove_all(dir);
}

TEST(RunExperiment, SynchronousRunsAreByteIdentical) {
  auto dir = scratch("det");
  auto cfg = tiny_run();
  cfg.trainer.worker_count = 2;
  auto a = run_single(cfg, dir / "a");
  auto b = run_single(cfg, dir / "b");
  std::ifstream fa(a.csv, std::ios::binary), fb(b.csv, std::ios::binary);
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_GT(sa.str().size(), kCsvHeader.size() + 1);
  fs::remove_all(dir);
}

TEST(MannWhitney, NullAndShift) {
  std::vector<double> a{0.1, 0.4, 0.2, 0.9, 0.5};
  auto same = mann_whitney(a, a);
  EXPECT_NEAR(same.p_value, 1.0, 1e-12);
  auto ties = mann_whitney({1, 1, 1, 1, 1}, {1, 1, 1, 1, 1});
  EXPECT_EQ(ties.p_value, 1.0);
  // Shift every value of b by +1: complete separation.
  std::vector<double> b;
  for (double v : a) b.push_back(v + 1.0);
  auto shifted = mann_whitney(a, b);
  EXPECT_LT(shifted.p_value, 0.05);
  EXPECT_EQ(shifted.u, 0.0);
}

TEST(MannWhitney, MatchesHandComputation) {
  // a = {1, 3}, b = {2, 4, 5}: ranks of a are 1 and 3, U = 4 - 3 = 1.
  auto r = mann_whitney({1, 3}, {2, 4, 5});
  EXPECT_EQ(r.u, 1.0);
  const double sd = std::sqrt(2.0 * 3.0 * 6.0 / 12.0);
  EXPECT_NEAR(r.z, -(3.0 - 1.0 - 0.5) / sd, 1e-12);
}

TEST(Compare, SyntheticFixture) {
  auto dir = scratch("compare");
  poer::Rng rng(9);
  auto write_arm = [&](const std::string& name, double shift) {
    fs::create_directories(dir / name);
    for (int s = 0; s < 6; ++s) {
      MetricsRecord r;
      r.extrinsic_reward_mean = shift + 0.1 * rng.uniform();
      save_csv(dir / name / ("seed_" + std::to_string(s) + ".csv"), {r});
    }
  };
  write_arm("base", 0.0);
  write_arm("better", 1.0);
  write_arm("same", 0.0);
  auto arms = discover_arms(dir);
  ASSERT_EQ(arms.size(), 3u);
  auto rep = compare_arms(arms, "extrinsic_reward_mean", {{"better", "base"}});
  ASSERT_EQ(rep.pairs.size(), 1u);
  EXPECT_LT(rep.pairs[0].test.p_value, 0.05);
  EXPECT_GT(rep.pairs[0].median_a, rep.pairs[0].median_b);

  auto self = compare_arms({arms[0], arms[0]});
  EXPECT_NEAR(self.pairs[0].test.p_value, 1.0, 1e-12);
  EXPECT_EQ(self.pairs[0].median_a, self.pairs[0].median_b);

  std::stringstream out;
  write_report(out, rep);
  EXPECT_NE(out.str().find("better vs base"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Compare, Refusals) {
  auto dir = scratch("refuse");
  fs::create_directories(dir / "a");
  for (int s = 0; s < 3; ++s) save_csv(dir / "a" / ("seed_" + std::to_string(s) + ".csv"), {});
  auto arms = discover_arms(dir);
  arms.push_back(arms[0]);
  EXPECT_THROW(compare_arms(arms), ConfigError);  // only 3 seeds

  std::vector<fs::path> files;
  for (int s = 0; s < 5; ++s) files.push_back(dir / ("missing_" + std::to_string(s) + ".csv"));
  try {
    compare_arms({{"x", files}, {"y", files}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("missing_0.csv"), std::string::npos);
  }
  fs::remove_all(dir);
}
