#include "poer/agent/losses.hpp"

#include <cmath>
#include <string>

#include "poer/common/error.hpp"

namespace poer::agent {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw UsageError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                     std::to_string(b) + ")");
  }
}

nn::Tensor column(std::span<const double> values) {
  return nn::Tensor({values.size(), 1}, std::vector<double>(values.begin(), values.end()));
}

}  // namespace

void LossConfig::validate() const {
  if (!(clip_epsilon > 0.0)) throw ConfigError("clip_epsilon must be positive");
  if (!(entropy_beta >= 0.0)) throw ConfigError("entropy_beta must be non-negative");
  if (!(gamma_ext >= 0.0 && gamma_ext <= 1.0) || !(gamma_int >= 0.0 && gamma_int <= 1.0)) {
    throw ConfigError("discount factors must lie in [0,1]");
  }
  if (!(adv_weight_ext > adv_weight_int)) {
    throw ConfigError("the extrinsic advantage weight must exceed the intrinsic one");
  }
  if (!(critic_coef >= 0.0)) throw ConfigError("critic_coef must be non-negative");
}

std::vector<double> discounted_returns(std::span<const double> rewards,
                                       const std::vector<bool>& dones, double bootstrap,
                                       double gamma, bool episodic) {
  require_same_length(rewards.size(), dones.size(), "discounted_returns");
  std::vector<double> out(rewards.size());
  double next = bootstrap;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    if (episodic && dones[t]) next = 0.0;
    next = rewards[t] + gamma * next;
    out[t] = next;
  }
  return out;
}

std::vector<double> advantage(std::span<const double> returns, std::span<const double> values) {
  require_same_length(returns.size(), values.size(), "advantage");
  std::vector<double> out(returns.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = returns[i] - values[i];
  return out;
}

std::vector<double> mixed_advantage(std::span<const double> adv_ext,
                                    std::span<const double> adv_int, const LossConfig& config) {
  require_same_length(adv_ext.size(), adv_int.size(), "mixed_advantage");
  if (!(config.adv_weight_ext > config.adv_weight_int)) {
    throw ConfigError("the extrinsic advantage weight must exceed the intrinsic one");
  }
  std::vector<double> out(adv_ext.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = config.adv_weight_ext * adv_ext[i] + config.adv_weight_int * adv_int[i];
  }
  return out;
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

nn::Var entropy_from_logits(nn::Tape& tape, nn::Var logits) {
  const nn::Var log_p = tape.log_softmax(logits);
  const nn::Var p = tape.exp(log_p);
  return tape.scale(tape.row_sum(tape.mul(p, log_p)), -1.0);
}

nn::Var ppo_actor_loss(nn::Tape& tape, nn::Var log_prob_new, std::span<const double> log_prob_old,
                       std::span<const double> advantage, nn::Var entropy, const LossConfig& config) {
  const std::size_t n = tape.value(log_prob_new).size();
  require_same_length(n, log_prob_old.size(), "ppo_actor_loss");
  require_same_length(n, advantage.size(), "ppo_actor_loss");
  require_same_length(n, tape.value(entropy).size(), "ppo_actor_loss");

  const nn::Var ratio = tape.exp(tape.sub(log_prob_new, tape.constant(column(log_prob_old))));
  if (!tape.value(ratio).all_finite()) throw NumericalFault("PPO probability ratio is not finite");
  const nn::Var adv = tape.constant(column(advantage));
  const nn::Var unclipped = tape.mul(ratio, adv);
  const nn::Var clipped =
      tape.mul(tape.clip(ratio, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon), adv);
  const nn::Var surrogate = tape.minimum(unclipped, clipped);
  const nn::Var objective = tape.sub(surrogate, tape.scale(entropy, config.entropy_beta));
  return tape.scale(tape.mean(objective), -1.0);
}

double ppo_actor_loss(std::span<const double> log_prob_new, std::span<const double> log_prob_old,
                      std::span<const double> advantage, std::span<const double> entropy,
                      const LossConfig& config) {
  nn::Tape tape;
  const nn::Var lp = tape.constant(column(log_prob_new));
  const nn::Var ent = tape.constant(column(entropy));
  return tape.value(ppo_actor_loss(tape, lp, log_prob_old, advantage, ent, config)).item();
}

nn::Var pvo_critic_loss(nn::Tape& tape, std::span<const double> returns, nn::Var value_new,
                        std::span<const double> value_old, const LossConfig& config) {
  const std::size_t n = tape.value(value_new).size();
  require_same_length(n, returns.size(), "pvo_critic_loss");
  require_same_length(n, value_old.size(), "pvo_critic_loss");
  const nn::Var ret = tape.constant(column(returns));
  const nn::Var old = tape.constant(column(value_old));
  const nn::Var clipped_value = tape.add(
      old, tape.clip(tape.sub(value_new, old), -config.clip_epsilon, config.clip_epsilon));
  const nn::Var err = tape.square(tape.sub(ret, value_new));
  const nn::Var err_clipped = tape.square(tape.sub(ret, clipped_value));
  return tape.scale(tape.mean(tape.maximum(err, err_clipped)), config.critic_coef);
}

double pvo_critic_loss(std::span<const double> returns, std::span<const double> value_new,
                       std::span<const double> value_old, const LossConfig& config) {
  nn::Tape tape;
  const nn::Var v = tape.constant(column(value_new));
  return tape.value(pvo_critic_loss(tape, returns, v, value_old, config)).item();
}

}  // namespace poer::agent
