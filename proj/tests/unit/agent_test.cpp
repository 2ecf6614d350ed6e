#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "poer/agent/losses.hpp"
#include "poer/agent/policy.hpp"
#include "poer/common/error.hpp"
#include "support/finite_diff.hpp"

using namespace poer;
using namespace poer::agent;

namespace {

// O(n^2) double loop: sum of discounted rewards up to (and including) the
// first terminal step, plus the discounted bootstrap if no terminal occurs.
std::vector<double> brute_force_returns(const std::vector<double>& r, const std::vector<bool>& d,
                                        double bootstrap, double gamma, bool episodic) {
  std::vector<double> out(r.size());
  for (std::size_t t = 0; t < r.size(); ++t) {
    double total = 0.0, discount = 1.0;
    bool ended = false;
    for (std::size_t k = t; k < r.size(); ++k) {
      total += discount * r[k];
      discount *= gamma;
      if (episodic && d[k]) {
        ended = true;
        break;
      }
    }
    if (!ended) total += discount * bootstrap;
    out[t] = total;
  }
  return out;
}

LossConfig eps(double e, double beta = 0.0) {
  LossConfig cfg;
  cfg.clip_epsilon = e;
  cfg.entropy_beta = beta;
  return cfg;
}

}  // namespace

TEST(DiscountedReturns, GeometricSum) {
  const std::vector<double> r{0, 0, 1};
  const auto out = discounted_returns(r, {false, false, false}, 0.0, 0.5);
  EXPECT_DOUBLE_EQ(out[0], 0.25);
  EXPECT_DOUBLE_EQ(out[1], 0.5);
  EXPECT_DOUBLE_EQ(out[2], 1.0);
}

TEST(DiscountedReturns, MyopicEqualsRewards) {
  const std::vector<double> r{0.3, -1, 2, 5};
  EXPECT_EQ(discounted_returns(r, {false, true, false, false}, 7.0, 0.0), r);
}

TEST(DiscountedReturns, NoLeakageAcrossEpisodeBoundary) {
  const std::vector<double> r{1, 1};
  const auto out = discounted_returns(r, {true, false}, 0.0, 0.9);
  EXPECT_DOUBLE_EQ(out[0], 1.0);
  EXPECT_DOUBLE_EQ(out[1], 1.0);
  // Non-episodic mode lets the recursion cross the boundary.
  EXPECT_DOUBLE_EQ(discounted_returns(r, {true, false}, 0.0, 0.9, false)[0], 1.9);
}

TEST(DiscountedReturns, MatchesBruteForceOracle) {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(64);
    std::vector<double> r(n);
    std::vector<bool> d(n);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = rng.normal();
      d[i] = rng.uniform() < 0.1;
    }
    const double gamma = rng.uniform(), boot = rng.normal();
    for (bool episodic : {true, false}) {
      const auto fast = discounted_returns(r, d, boot, gamma, episodic);
      const auto slow = brute_force_returns(r, d, boot, gamma, episodic);
      for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(fast[i], slow[i], 1e-10);
    }
  }
}

TEST(Advantage, Examples) {
  const std::vector<double> v{0.5, 0.5};
  EXPECT_EQ(advantage(v, v), (std::vector<double>{0, 0}));
  EXPECT_EQ(advantage(std::vector<double>{1, 2}, v), (std::vector<double>{0.5, 1.5}));
  Rng rng(3);
  std::vector<double> a(20), b(20);
  for (auto& x : a) x = rng.normal();
  for (auto& x : b) x = rng.normal();
  const auto out = advantage(a, b);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(out[i], a[i] - b[i]);
  EXPECT_THROW(advantage(a, std::vector<double>{1.0}), UsageError);
}

TEST(MixedAdvantage, WeightedSum) {
  LossConfig cfg;
  EXPECT_EQ(mixed_advantage(std::vector<double>{1}, std::vector<double>{1}, cfg)[0], 3.0);
  const std::vector<double> ext{0.5, -2.0};
  const auto out = mixed_advantage(ext, std::vector<double>{0, 0}, cfg);
  EXPECT_EQ(out[0], 1.0);
  EXPECT_EQ(out[1], -4.0);
}

TEST(MixedAdvantage, RejectsWeightsFavouringIntrinsic) {
  LossConfig cfg;
  cfg.adv_weight_ext = 1.0;
  cfg.adv_weight_int = 1.0;
  EXPECT_THROW(mixed_advantage(std::vector<double>{1}, std::vector<double>{1}, cfg), ConfigError);
}

TEST(MixedAdvantage, ArgmaxInvariantToPositiveRescaling) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> ext(6), in(6);
    for (auto& x : ext) x = rng.normal();
    for (auto& x : in) x = rng.normal();
    LossConfig cfg;
    cfg.adv_weight_ext = 1.0 + rng.uniform() * 3.0;
    cfg.adv_weight_int = rng.uniform();
    const auto base = mixed_advantage(ext, in, cfg);
    const double c = 0.01 + rng.uniform() * 50.0;
    cfg.adv_weight_ext *= c;
    cfg.adv_weight_int *= c;
    const auto scaled = mixed_advantage(ext, in, cfg);
    EXPECT_EQ(std::max_element(base.begin(), base.end()) - base.begin(),
              std::max_element(scaled.begin(), scaled.end()) - scaled.begin());
  }
}

TEST(PpoActorLoss, HandEvaluatedExamples) {
  const std::vector<double> zero{0.0};
  // r = 1, A = 1.
  EXPECT_NEAR(ppo_actor_loss(std::vector<double>{-0.7}, std::vector<double>{-0.7},
                             std::vector<double>{1.0}, zero, eps(0.1)),
              -1.0, 1e-12);
  // r = 1.5, A = 1, eps = 0.2: min(1.5, 1.2) = 1.2.
  const double old = std::log(0.4);
  EXPECT_NEAR(ppo_actor_loss(std::vector<double>{std::log(0.6)}, std::vector<double>{old},
                             std::vector<double>{1.0}, zero, eps(0.2)),
              -1.2, 1e-12);
  // r = 0.5, A = -1: min(-0.5, -0.8) = -0.8.
  EXPECT_NEAR(ppo_actor_loss(std::vector<double>{std::log(0.2)}, std::vector<double>{old},
                             std::vector<double>{-1.0}, zero, eps(0.2)),
              0.8, 1e-12);
}

TEST(PpoActorLoss, EqualsNegativeMeanAdvantageAtRatioOne) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(30);
    std::vector<double> lp(n), adv(n), ent(n);
    for (auto& x : lp) x = -rng.uniform() * 3.0;
    for (auto& x : adv) x = rng.normal();
    for (auto& x : ent) x = rng.uniform();
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
    EXPECT_NEAR(ppo_actor_loss(lp, lp, adv, ent, eps(0.1)), -mean, 1e-12);
  }
}

TEST(PpoActorLoss, EntropyTermEntersWithStatedSign) {
  const std::vector<double> lp{-1.0}, adv{0.0}, ent{2.0};
  EXPECT_NEAR(ppo_actor_loss(lp, lp, adv, ent, eps(0.1, 0.5)), 1.0, 1e-12);
}

// d loss / d logp_new by central differences on a single step.
double actor_slope(double ratio, double adv, double epsilon) {
  const double h = 1e-6, old = std::log(0.3), lp = old + std::log(ratio);
  auto f = [&](double x) {
    return ppo_actor_loss(std::vector<double>{x}, std::vector<double>{old},
                          std::vector<double>{adv}, std::vector<double>{0.0}, eps(epsilon));
  };
  return (f(lp + h) - f(lp - h)) / (2 * h);
}

TEST(PpoActorLoss, ClippingInactivityByFiniteDifferences) {
  const double e = 0.2;
  for (double adv : {1.3, -0.7}) {
    for (double r : {0.85, 1.0, 1.1}) {
      // Inside the trust region the surrogate slope is -r*A.
      EXPECT_NEAR(actor_slope(r, adv, e), -r * adv, 1e-6);
    }
  }
  EXPECT_EQ(actor_slope(1.5, 1.0, e), 0.0);
  EXPECT_EQ(actor_slope(0.5, -1.0, e), 0.0);
  // The pessimistic side stays unclipped.
  EXPECT_NEAR(actor_slope(1.5, -1.0, e), 1.5, 1e-6);
  EXPECT_NEAR(actor_slope(0.5, 1.0, e), -0.5, 1e-6);
}

TEST(PpoActorLoss, NonFiniteRatioIsNumericalFault) {
  EXPECT_THROW(ppo_actor_loss(std::vector<double>{0.0}, std::vector<double>{-1000.0},
                              std::vector<double>{1.0}, std::vector<double>{0.0}, eps(0.1)),
               NumericalFault);
}

TEST(PvoCriticLoss, HandEvaluatedExamples) {
  const LossConfig cfg = eps(0.2);
  EXPECT_NEAR(pvo_critic_loss(std::vector<double>{1.0}, std::vector<double>{0.5},
                              std::vector<double>{0.0}, cfg),
              0.32, 1e-12);
  // V = V_old: no clipping effect.
  EXPECT_NEAR(pvo_critic_loss(std::vector<double>{2.0}, std::vector<double>{0.5},
                              std::vector<double>{0.5}, cfg),
              0.5 * 1.5 * 1.5, 1e-12);
  EXPECT_EQ(pvo_critic_loss(std::vector<double>{0.3}, std::vector<double>{0.3},
                            std::vector<double>{0.3}, cfg),
            0.0);
}

TEST(PvoCriticLoss, NonNegativeAndZeroOnlyAtFixedPoint) {
  Rng rng(9);
  const LossConfig cfg = eps(0.1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(8);
    std::vector<double> ret(n), v(n), old(n);
    for (std::size_t i = 0; i < n; ++i) {
      ret[i] = rng.normal();
      v[i] = rng.normal();
      old[i] = rng.uniform() < 0.3 ? v[i] : rng.normal();
    }
    const double loss = pvo_critic_loss(ret, v, old, cfg);
    EXPECT_GE(loss, 0.0);
    EXPECT_GT(loss, 0.0);
  }
  const std::vector<double> same{0.1, -0.4};
  EXPECT_EQ(pvo_critic_loss(same, same, same, cfg), 0.0);
}

TEST(Entropy, Examples) {
  EXPECT_NEAR(entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}), std::log(4.0), 1e-15);
  EXPECT_EQ(entropy(std::vector<double>{0, 1, 0}), 0.0);
  EXPECT_NEAR(entropy(std::vector<double>{0.5, 0.5, 0, 0}), std::log(2.0), 1e-15);
}

TEST(Entropy, TapeVersionMatchesPlain) {
  Rng rng(2);
  std::vector<double> logits(5);
  for (auto& v : logits) v = rng.normal(0, 2);
  nn::Tape tape;
  const nn::Var l = tape.constant(nn::Tensor::matrix(1, 5, logits));
  const double from_tape = tape.value(entropy_from_logits(tape, l)).item();
  const auto probs = tape.value(tape.softmax(l));
  EXPECT_NEAR(from_tape, entropy(probs.data()), 1e-12);
}

TEST(Act, UniformLogitsSampleUniformly) {
  Rng rng(77);
  PolicyNet net = PolicyNet::create({6, 4, 8, 1}, rng);
  for (auto& w : net.policy_head.weight.data()) w = 0.0;
  const std::vector<double> obs{1, 0, 0, 1, 0, 0};
  const int draws = 100000;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(act(net, obs, rng).action)];
  const double p = 0.25, sigma = std::sqrt(draws * p * (1 - p));
  for (int c : counts) EXPECT_LT(std::abs(c - draws * p), 3 * sigma);
}

TEST(Act, SaturatedLogitIsAlwaysChosen) {
  Rng rng(78);
  PolicyNet net = PolicyNet::create({3, 3, 4, 1}, rng);
  for (auto& w : net.policy_head.weight.data()) w = 0.0;
  net.policy_head.bias[2] = 50.0;
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(act(net, std::vector<double>{0.2, 0.1, 0.9}, rng).action, 2);
}

TEST(Act, LogProbMatchesLogSoftmax) {
  Rng rng(79);
  PolicyNet net = PolicyNet::create({5, 3, 8, 2}, rng);
  for (auto& w : net.policy_head.weight.data()) w = rng.normal();
  for (int i = 0; i < 200; ++i) {
    std::vector<double> obs(5);
    for (auto& v : obs) v = rng.uniform();
    const auto res = act(net, obs, rng);
    nn::Tape tape;
    const auto vars = evaluate(tape, net, 0, tape.constant(nn::Tensor::matrix(1, 5, obs)));
    const auto logp = tape.value(tape.log_softmax(vars.logits));
    EXPECT_NEAR(res.log_prob, logp[static_cast<std::size_t>(res.action)], 1e-12);
    EXPECT_LE(res.log_prob, 0.0);
    EXPECT_NEAR(res.value_ext, tape.value(vars.value_ext).item(), 1e-12);
    EXPECT_NEAR(res.value_int, tape.value(vars.value_int).item(), 1e-12);
  }
}

TEST(Losses, PolicyAndCriticGradientsMatchFiniteDifferences) {
  Rng rng(90);
  for (int trial = 0; trial < 10; ++trial) {
    PolicyNet net = PolicyNet::create({4, 3, 6, 2}, rng);
    for (auto* p : parameters(net)) {
      for (auto& v : p->data()) v = rng.normal(0.0, 0.6);
    }
    const std::size_t n = 5;
    nn::Tensor obs({n, 4}, 0.0);
    for (auto& v : obs.data()) v = rng.normal();
    std::vector<int> actions(n);
    std::vector<double> old_lp(n), adv(n), ret_e(n), ret_i(n), old_e(n), old_i(n);
    for (std::size_t i = 0; i < n; ++i) {
      actions[i] = static_cast<int>(rng.uniform_index(3));
      old_lp[i] = -rng.uniform() * 2.0 - 0.1;
      adv[i] = rng.normal();
      ret_e[i] = rng.normal();
      ret_i[i] = rng.normal();
      old_e[i] = rng.normal();
      old_i[i] = rng.normal();
    }
    LossConfig cfg = eps(0.3, 0.01);
    auto loss_of = [&](nn::Tape& t) {
      const auto vars = evaluate(t, net, 0, t.constant(obs));
      const auto lp = t.gather_cols(t.log_softmax(vars.logits), actions);
      const auto ent = entropy_from_logits(t, vars.logits);
      const auto actor = ppo_actor_loss(t, lp, old_lp, adv, ent, cfg);
      const auto critic = t.add(pvo_critic_loss(t, ret_e, vars.value_ext, old_e, cfg),
                                pvo_critic_loss(t, ret_i, vars.value_int, old_i, cfg));
      return t.add(actor, critic);
    };
    nn::Tape tape;
    const auto grads = nn::backward(tape, loss_of(tape));
    auto params = parameters(net);
    const auto check = poer::testing::check_gradients(params, grads, [&] {
      nn::Tape t;
      return t.value(loss_of(t)).item();
    });
    EXPECT_LT(check.max_rel_error, 1e-4) << check.worst;
  }
}
