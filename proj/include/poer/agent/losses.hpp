#pragma once

#include <span>
#include <vector>

#include "poer/nn/tape.hpp"

namespace poer::agent {

struct LossConfig {
  double clip_epsilon = 0.1;
  double entropy_beta = 0.001;
  double critic_coef = 0.5;
  double gamma_ext = 0.999;
  double gamma_int = 0.99;
  double adv_weight_ext = 2.0;
  double adv_weight_int = 1.0;
  bool episodic_ext = true;
  bool episodic_int = false;

  void validate() const;
};

// R_t = r_t + gamma * R_{t+1}, seeded with `bootstrap` past the last step.
// In episodic mode a done flag at step t stops the recursion (R_t = r_t).
std::vector<double> discounted_returns(std::span<const double> rewards,
                                       const std::vector<bool>& dones, double bootstrap,
                                       double gamma, bool episodic = true);

// A = R - V, elementwise.
std::vector<double> advantage(std::span<const double> returns, std::span<const double> values);

// w_ext * A_ext + w_int * A_int. Requires w_ext > w_int.
std::vector<double> mixed_advantage(std::span<const double> adv_ext,
                                    std::span<const double> adv_int, const LossConfig& config);

// -sum p log p, with 0 log 0 = 0.
double entropy(std::span<const double> probs);

// Per-row policy entropy [N,1] computed from logits [N,A].
nn::Var entropy_from_logits(nn::Tape& tape, nn::Var logits);

// Clipped PPO actor loss, the negated objective:
//   -mean( min(r*A, clip(r, 1-eps, 1+eps)*A) - beta*S ),  r = exp(logp_new - logp_old)
// `log_prob_new` and `entropy` are [N,1] columns.
nn::Var ppo_actor_loss(nn::Tape& tape, nn::Var log_prob_new, std::span<const double> log_prob_old,
                       std::span<const double> advantage, nn::Var entropy, const LossConfig& config);

double ppo_actor_loss(std::span<const double> log_prob_new, std::span<const double> log_prob_old,
                      std::span<const double> advantage, std::span<const double> entropy,
                      const LossConfig& config);

// Clipped critic loss for one value head:
//   c1 * mean( max((R-V)^2, (R-V_hat)^2) ),  V_hat = V_old + clip(V - V_old, -eps, eps)
nn::Var pvo_critic_loss(nn::Tape& tape, std::span<const double> returns, nn::Var value_new,
                        std::span<const double> value_old, const LossConfig& config);

double pvo_critic_loss(std::span<const double> returns, std::span<const double> value_new,
                       std::span<const double> value_old, const LossConfig& config);

}  // namespace poer::agent
