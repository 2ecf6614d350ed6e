#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "poer/common/rng.hpp"
#include "poer/envs/env.hpp"
#include "poer/nn/adam.hpp"
#include "poer/nn/mlp.hpp"
#include "poer/nn/tape.hpp"

namespace poer::rnd {

// Per-entry running mean / population standard deviation (Welford), used to
// whiten RND inputs. Output is clipped to [-clip, clip].
class RunningNormalizer {
 public:
  static constexpr double kStdFloor = 1e-8;

  explicit RunningNormalizer(std::size_t width = 0, double clip = 5.0);

  void update(std::span<const double> obs);
  std::vector<double> normalize(std::span<const double> obs) const;

  std::size_t width() const { return mean_.size(); }
  std::uint64_t count() const { return count_; }
  double clip() const { return clip_; }
  const std::vector<double>& mean() const { return mean_; }
  std::vector<double> stddev() const;

 private:
  std::uint64_t count_ = 0;
  double clip_;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

struct RndConfig {
  std::size_t input_length = 0;
  std::size_t hidden_units = 64;
  std::size_t hidden_layers = 2;
  std::size_t feature_length = 32;
  double dropout_rate = 0.5;
  double obs_clip = 5.0;
};

// Fixed random target network and trainable predictor of identical shape.
struct RndPair {
  nn::MlpParams target;
  nn::MlpParams predictor;
  std::size_t feature_length = 0;
  RunningNormalizer obs_normalizer;

  static RndPair create(const RndConfig& config, Rng& rng);
};

// Squared prediction error averaged over the feature vector, on the
// normalized observation, predictor in evaluation mode. Never rescaled.
double intrinsic_reward(const RndPair& pair, std::span<const double> obs);

// Batched form: one reward per row of `observations`.
std::vector<double> intrinsic_rewards(const RndPair& pair,
                                      std::span<const envs::StackedObs> observations);

// Stacks normalized observations into an [N, input] tensor.
nn::Tensor normalized_rows(const RunningNormalizer& normalizer,
                           std::span<const envs::StackedObs> observations);

// Mean squared prediction error over rows and features, with predictor
// dropout active. Predictor layers are recorded with ParamIds starting at
// `first_id`; the target is a constant.
nn::Var predictor_loss(nn::Tape& tape, const RndPair& pair, nn::ParamId first_id,
                       const nn::Tensor& normalized_obs, Rng& dropout_rng);

// One Adam step on the predictor. `optimizer` must have been built over
// nn::parameters(pair.predictor). Returns nullopt for an empty batch.
// Throws ContractViolation when called during a replay phase.
std::optional<double> train_predictor(RndPair& pair,
                                      std::span<const envs::StackedObs> observations,
                                      nn::AdamState& optimizer, Rng& dropout_rng,
                                      bool replay_phase = false);

}  // namespace poer::rnd
