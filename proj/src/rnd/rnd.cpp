#include "poer/rnd/rnd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "poer/common/error.hpp"

namespace poer::rnd {

RunningNormalizer::RunningNormalizer(std::size_t width, double clip)
    : clip_(clip), mean_(width, 0.0), m2_(width, 0.0) {}

void RunningNormalizer::update(std::span<const double> obs) {
  if (mean_.empty() && count_ == 0) {
    mean_.assign(obs.size(), 0.0);
    m2_.assign(obs.size(), 0.0);
  }
  if (obs.size() != mean_.size()) {
    throw ConfigError("normalizer expects width " + std::to_string(mean_.size()) + ", got " +
                      std::to_string(obs.size()));
  }
  ++count_;
  const double n = static_cast<double>(count_);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double delta = obs[i] - mean_[i];
    mean_[i] += delta / n;
    m2_[i] += delta * (obs[i] - mean_[i]);
  }
}

std::vector<double> RunningNormalizer::stddev() const {
  std::vector<double> out(m2_.size(), 0.0);
  if (count_ == 0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::sqrt(std::max(m2_[i], 0.0) / static_cast<double>(count_));
  }
  return out;
}

std::vector<double> RunningNormalizer::normalize(std::span<const double> obs) const {
  if (count_ == 0) throw UsageError("normalizer used before observing any data");
  if (obs.size() != mean_.size()) {
    throw ConfigError("normalizer expects width " + std::to_string(mean_.size()) + ", got " +
                      std::to_string(obs.size()));
  }
  std::vector<double> out(obs.size());
  const double n = static_cast<double>(count_);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double sd = std::sqrt(std::max(m2_[i], 0.0) / n);
    out[i] = std::clamp((obs[i] - mean_[i]) / std::max(sd, kStdFloor), -clip_, clip_);
  }
  return out;
}

RndPair RndPair::create(const RndConfig& config, Rng& rng) {
  if (config.input_length == 0) throw ConfigError("RND input length must be positive");
  std::vector<std::size_t> sizes{config.input_length};
  for (std::size_t l = 0; l < config.hidden_layers; ++l) sizes.push_back(config.hidden_units);
  sizes.push_back(config.feature_length);
  RndPair pair;
  pair.target = nn::make_mlp(sizes, nn::Activation::kRelu, nn::Activation::kIdentity, 0.0, rng);
  pair.predictor = nn::make_mlp(sizes, nn::Activation::kRelu, nn::Activation::kIdentity,
                                config.dropout_rate, rng);
  pair.feature_length = config.feature_length;
  pair.obs_normalizer = RunningNormalizer(config.input_length, config.obs_clip);
  return pair;
}

nn::Tensor normalized_rows(const RunningNormalizer& normalizer,
                           std::span<const envs::StackedObs> observations) {
  const std::size_t width = normalizer.width();
  nn::Tensor rows({observations.size(), width}, 0.0);
  for (std::size_t r = 0; r < observations.size(); ++r) {
    const auto norm = normalizer.normalize(observations[r]);
    std::copy(norm.begin(), norm.end(), rows.row(r).begin());
  }
  return rows;
}

std::vector<double> intrinsic_rewards(const RndPair& pair,
                                      std::span<const envs::StackedObs> observations) {
  if (observations.empty()) return {};
  const nn::Tensor input = normalized_rows(pair.obs_normalizer, observations);
  const nn::Tensor pred = nn::forward_mlp(pair.predictor, input, false);
  const nn::Tensor targ = nn::forward_mlp(pair.target, input, false);
  if (!pred.all_finite() || !targ.all_finite()) {
    throw NumericalFault("RND network produced a non-finite output");
  }
  const std::size_t f = pred.cols();
  std::vector<double> out(observations.size(), 0.0);
  for (std::size_t r = 0; r < out.size(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < f; ++c) {
      const double d = pred[r * f + c] - targ[r * f + c];
      acc += d * d;
    }
    out[r] = acc / static_cast<double>(f);
  }
  return out;
}

double intrinsic_reward(const RndPair& pair, std::span<const double> obs) {
  const envs::StackedObs row(obs.begin(), obs.end());
  return intrinsic_rewards(pair, std::span<const envs::StackedObs>(&row, 1)).front();
}

nn::Var predictor_loss(nn::Tape& tape, const RndPair& pair, nn::ParamId first_id,
                       const nn::Tensor& normalized_obs, Rng& dropout_rng) {
  const nn::Tensor targ = nn::forward_mlp(pair.target, normalized_obs, false);
  const nn::Var input = tape.constant(normalized_obs);
  const nn::Var pred = nn::forward_mlp(tape, pair.predictor, first_id, input, true, &dropout_rng);
  return tape.mean(tape.square(tape.sub(pred, tape.constant(targ))));
}

std::optional<double> train_predictor(RndPair& pair,
                                      std::span<const envs::StackedObs> observations,
                                      nn::AdamState& optimizer, Rng& dropout_rng,
                                      bool replay_phase) {
  if (replay_phase) {
    throw ContractViolation("the RND predictor cannot be trained during the replay phase");
  }
  if (observations.empty()) return std::nullopt;
  nn::Tape tape;
  const nn::Var loss =
      predictor_loss(tape, pair, 0, normalized_rows(pair.obs_normalizer, observations), dropout_rng);
  const double value = tape.value(loss).item();
  if (!std::isfinite(value)) throw NumericalFault("RND predictor loss is not finite");
  const auto grads = tape.backward(loss);
  auto params = nn::parameters(pair.predictor);
  optimizer.step(params, grads);
  return value;
}

}  // namespace poer::rnd
