#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "poer/common/error.hpp"
#include "poer/rnd/rnd.hpp"

using namespace poer;
using namespace poer::rnd;

namespace {

RndPair small_pair(Rng& rng, std::size_t input = 12) {
  RndConfig cfg;
  cfg.input_length = input;
  cfg.hidden_units = 16;
  cfg.feature_length = 8;
  return RndPair::create(cfg, rng);
}

std::vector<envs::StackedObs> random_obs(Rng& rng, std::size_t n, std::size_t width) {
  std::vector<envs::StackedObs> out(n, envs::StackedObs(width));
  for (auto& o : out) {
    for (auto& v : o) v = rng.uniform();
  }
  return out;
}

// Plain-loop evaluation of (1/F) * sum (pred_i - targ_i)^2.
double loop_reward(const RndPair& pair, const envs::StackedObs& obs) {
  auto run = [](const nn::MlpParams& mlp, std::vector<double> x) {
    for (const auto& layer : mlp.layers) {
      std::vector<double> y(layer.out_size());
      for (std::size_t o = 0; o < y.size(); ++o) {
        double acc = layer.bias[o];
        for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * layer.weight.at(i, o);
        y[o] = layer.activation == nn::Activation::kRelu ? std::max(acc, 0.0) : acc;
      }
      x = y;
    }
    return x;
  };
  // Two-pass statistics are not needed here: reuse the normalizer's output.
  const auto x = pair.obs_normalizer.normalize(obs);
  const auto p = run(pair.predictor, x);
  const auto t = run(pair.target, x);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - t[i]) * (p[i] - t[i]);
  return acc / static_cast<double>(pair.feature_length);
}

}  // namespace

TEST(RunningNormalizer, ConstantStreamNormalizesToZero) {
  RunningNormalizer norm(3);
  for (int i = 0; i < 10; ++i) norm.update(std::vector<double>{1.0, 0.0, 0.25});
  for (double v : norm.normalize(std::vector<double>{1.0, 0.0, 0.25})) EXPECT_EQ(v, 0.0);
}

TEST(RunningNormalizer, ClipsAtBound) {
  RunningNormalizer norm(1, 5.0);
  for (double v : {0.0, 2.0, 0.0, 2.0}) norm.update(std::vector<double>{v});
  // mean 1, std 1: ten standard deviations out is clipped to 5.
  EXPECT_EQ(norm.normalize(std::vector<double>{11.0})[0], 5.0);
  EXPECT_EQ(norm.normalize(std::vector<double>{-9.0})[0], -5.0);
}

TEST(RunningNormalizer, MatchesTwoPassStatistics) {
  Rng rng(31);
  const std::size_t width = 5, n = 777;
  RunningNormalizer norm(width);
  std::vector<std::vector<double>> data(n, std::vector<double>(width));
  for (auto& row : data) {
    for (auto& v : row) v = rng.normal(3.0, 2.0);
    norm.update(row);
  }
  const auto sd = norm.stddev();
  for (std::size_t i = 0; i < width; ++i) {
    double mean = 0.0;
    for (const auto& row : data) mean += row[i];
    mean /= n;
    double var = 0.0;
    for (const auto& row : data) var += (row[i] - mean) * (row[i] - mean);
    var /= n;
    EXPECT_NEAR(norm.mean()[i], mean, 1e-9);
    EXPECT_NEAR(sd[i], std::sqrt(var), 1e-9);
  }
}

TEST(RunningNormalizer, RequiresWarmup) {
  RunningNormalizer norm(2);
  EXPECT_THROW(norm.normalize(std::vector<double>{0.0, 1.0}), UsageError);
}

TEST(IntrinsicReward, ZeroWhenPredictorEqualsTarget) {
  Rng rng(1);
  auto pair = small_pair(rng);
  auto obs = random_obs(rng, 10, 12);
  for (const auto& o : obs) pair.obs_normalizer.update(o);
  for (std::size_t l = 0; l < pair.target.layers.size(); ++l) {
    pair.predictor.layers[l].weight = pair.target.layers[l].weight;
    pair.predictor.layers[l].bias = pair.target.layers[l].bias;
  }
  for (const auto& o : obs) EXPECT_EQ(intrinsic_reward(pair, o), 0.0);
}

TEST(IntrinsicReward, MatchesLoopOracleAndIsNonNegative) {
  Rng rng(2);
  auto pair = small_pair(rng);
  auto obs = random_obs(rng, 30, 12);
  for (const auto& o : obs) pair.obs_normalizer.update(o);
  const auto batched = intrinsic_rewards(pair, obs);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double expected = loop_reward(pair, obs[i]);
    EXPECT_NEAR(intrinsic_reward(pair, obs[i]), expected, 1e-12);
    EXPECT_NEAR(batched[i], expected, 1e-12);
    EXPECT_GT(batched[i], 0.0);
  }
}

TEST(IntrinsicReward, DecaysAfterTrainingOnFixedObservation) {
  Rng rng(3);
  auto pair = small_pair(rng);
  auto obs = random_obs(rng, 50, 12);
  for (const auto& o : obs) pair.obs_normalizer.update(o);
  const std::vector<envs::StackedObs> fixed{obs[0]};
  auto params = nn::parameters(pair.predictor);
  nn::AdamState adam({1e-3}, params);
  Rng drop(4);
  const double before = intrinsic_reward(pair, fixed[0]);
  for (int s = 0; s < 500; ++s) train_predictor(pair, fixed, adam, drop);
  EXPECT_LT(intrinsic_reward(pair, fixed[0]), before);
}

TEST(TrainPredictor, LossDecreasesNearlyMonotonically) {
  Rng rng(5);
  auto pair = small_pair(rng);
  auto obs = random_obs(rng, 20, 12);
  for (const auto& o : obs) pair.obs_normalizer.update(o);
  const std::vector<envs::StackedObs> fixed{obs[3]};
  auto params = nn::parameters(pair.predictor);
  nn::AdamState adam({1e-3}, params);
  Rng drop(6);
  // Track the evaluation-mode loss so dropout masks do not enter the metric.
  double prev = intrinsic_reward(pair, fixed[0]);
  const double first = prev;
  int increases = 0;
  for (int s = 0; s < 100; ++s) {
    ASSERT_TRUE(train_predictor(pair, fixed, adam, drop).has_value());
    const double now = intrinsic_reward(pair, fixed[0]);
    increases += now > prev;
    prev = now;
  }
  EXPECT_LE(increases, 5);
  EXPECT_LT(prev, first);
}

TEST(TrainPredictor, EmptyBatchIsNoOp) {
  Rng rng(7);
  auto pair = small_pair(rng);
  auto params = nn::parameters(pair.predictor);
  nn::AdamState adam({}, params);
  const auto before = nn::checksum(pair.predictor);
  Rng drop(1);
  EXPECT_FALSE(train_predictor(pair, {}, adam, drop).has_value());
  EXPECT_EQ(nn::checksum(pair.predictor), before);
  EXPECT_EQ(adam.step_count(), 0u);
}

TEST(TrainPredictor, TargetStaysFrozen) {
  Rng rng(8);
  auto pair = small_pair(rng);
  auto obs = random_obs(rng, 16, 12);
  for (const auto& o : obs) pair.obs_normalizer.update(o);
  const auto target_sum = nn::checksum(pair.target);
  const auto predictor_sum = nn::checksum(pair.predictor);
  auto params = nn::parameters(pair.predictor);
  nn::AdamState adam({}, params);
  Rng drop(2);
  for (int s = 0; s < 10; ++s) train_predictor(pair, obs, adam, drop);
  EXPECT_EQ(nn::checksum(pair.target), target_sum);
  EXPECT_NE(nn::checksum(pair.predictor), predictor_sum);
}

TEST(TrainPredictor, ForbiddenDuringReplay) {
  Rng rng(9);
  auto pair = small_pair(rng);
  auto obs = random_obs(rng, 4, 12);
  for (const auto& o : obs) pair.obs_normalizer.update(o);
  auto params = nn::parameters(pair.predictor);
  nn::AdamState adam({}, params);
  Rng drop(3);
  const auto before = nn::checksum(pair.predictor);
  EXPECT_THROW(train_predictor(pair, obs, adam, drop, /*replay_phase=*/true), ContractViolation);
  EXPECT_EQ(nn::checksum(pair.predictor), before);
}

TEST(TrainPredictor, NoveltyOrderingOnDisjointSets) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    auto pair = small_pair(rng, 10);
    // Region A lights up the first five entries, region B the last five.
    auto make = [&](bool region_b) {
      std::vector<envs::StackedObs> out(64, envs::StackedObs(10, 0.0));
      for (auto& o : out) {
        for (int k = 0; k < 2; ++k) o[(region_b ? 5 : 0) + rng.uniform_index(5)] = 1.0;
      }
      return out;
    };
    const auto a = make(false), b = make(true);
    for (const auto& o : a) pair.obs_normalizer.update(o);
    for (const auto& o : b) pair.obs_normalizer.update(o);
    auto params = nn::parameters(pair.predictor);
    nn::AdamState adam({1e-3}, params);
    Rng drop(seed);
    for (int s = 0; s < 600; ++s) train_predictor(pair, a, adam, drop);
    double ra = 0.0, rb = 0.0;
    for (double r : intrinsic_rewards(pair, a)) ra += r;
    for (double r : intrinsic_rewards(pair, b)) rb += r;
    wins += ra < rb;
  }
  EXPECT_EQ(wins, 5);
}
