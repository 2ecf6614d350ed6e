#include "poer/agent/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "poer/common/error.hpp"

namespace poer::agent {

namespace {

nn::DenseLayer head(std::size_t in, std::size_t out, double stddev, Rng& rng) {
  nn::DenseLayer layer;
  layer.weight = nn::Tensor({in, out}, 0.0);
  layer.bias = nn::Tensor({out}, 0.0);
  for (auto& w : layer.weight.data()) w = rng.normal(0.0, stddev);
  return layer;
}

// Returns x @ W + b for a head applied to trunk features.
nn::Tensor apply_head(const nn::DenseLayer& layer, const nn::Tensor& features) {
  nn::MlpParams single;
  single.layers.push_back(layer);
  return nn::forward_mlp(single, features, false);
}

}  // namespace

PolicyNet PolicyNet::create(const PolicyConfig& config, Rng& rng) {
  if (config.input_length == 0 || config.action_count <= 0 || config.hidden_layers == 0) {
    throw ConfigError("policy network needs inputs, actions and at least one hidden layer");
  }
  std::vector<std::size_t> sizes{config.input_length};
  for (std::size_t l = 0; l < config.hidden_layers; ++l) sizes.push_back(config.hidden_units);
  PolicyNet net;
  // The trunk ends in a hidden ReLU layer; heads are affine on top of it.
  net.trunk = nn::make_mlp(sizes, nn::Activation::kRelu, nn::Activation::kRelu, 0.0, rng);
  const auto h = config.hidden_units;
  const double scale = 1.0 / std::sqrt(static_cast<double>(h));
  net.policy_head = head(h, static_cast<std::size_t>(config.action_count), 0.01 * scale, rng);
  net.value_head_ext = head(h, 1, scale, rng);
  net.value_head_int = head(h, 1, scale, rng);
  return net;
}

std::vector<nn::Tensor*> parameters(PolicyNet& net) {
  auto out = nn::parameters(net.trunk);
  for (auto* layer : {&net.policy_head, &net.value_head_ext, &net.value_head_int}) {
    out.push_back(&layer->weight);
    out.push_back(&layer->bias);
  }
  return out;
}

std::vector<const nn::Tensor*> parameters(const PolicyNet& net) {
  auto out = nn::parameters(net.trunk);
  for (const auto* layer : {&net.policy_head, &net.value_head_ext, &net.value_head_int}) {
    out.push_back(&layer->weight);
    out.push_back(&layer->bias);
  }
  return out;
}

std::uint64_t checksum(const PolicyNet& net) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto* t : parameters(net)) h = nn::checksum(*t, h);
  return h;
}

nn::Tensor stack_rows(std::span<const envs::StackedObs> observations) {
  const std::size_t width = observations.empty() ? 0 : observations.front().size();
  nn::Tensor rows({observations.size(), width}, 0.0);
  for (std::size_t r = 0; r < observations.size(); ++r) {
    if (observations[r].size() != width) throw ConfigError("observation widths differ within a batch");
    std::copy(observations[r].begin(), observations[r].end(), rows.row(r).begin());
  }
  return rows;
}

PolicyOutput evaluate(const PolicyNet& net, const nn::Tensor& observations) {
  const nn::Tensor features = nn::forward_mlp(net.trunk, observations, false);
  PolicyOutput out;
  out.logits = apply_head(net.policy_head, features);
  const nn::Tensor ve = apply_head(net.value_head_ext, features);
  const nn::Tensor vi = apply_head(net.value_head_int, features);
  out.value_ext.assign(ve.data().begin(), ve.data().end());
  out.value_int.assign(vi.data().begin(), vi.data().end());
  if (!out.logits.all_finite() || !ve.all_finite() || !vi.all_finite()) {
    throw NumericalFault("policy network produced a non-finite output");
  }
  return out;
}

PolicyVars evaluate(nn::Tape& tape, const PolicyNet& net, nn::ParamId first_id,
                    nn::Var observations) {
  const nn::Var features = nn::forward_mlp(tape, net.trunk, first_id, observations, false);
  nn::ParamId id = first_id + net.trunk.param_count();
  auto affine = [&](const nn::DenseLayer& layer) {
    const nn::Var w = tape.parameter(layer.weight, id++);
    const nn::Var b = tape.parameter(layer.bias, id++);
    return tape.add_bias(tape.matmul(features, w), b);
  };
  PolicyVars vars;
  vars.logits = affine(net.policy_head);
  vars.value_ext = affine(net.value_head_ext);
  vars.value_int = affine(net.value_head_int);
  return vars;
}

ActResult act(const PolicyNet& net, std::span<const double> observation, Rng& rng) {
  const nn::Tensor input({1, observation.size()},
                         std::vector<double>(observation.begin(), observation.end()));
  const PolicyOutput out = evaluate(net, input);
  const auto logits = out.logits.row(0);
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  double total = 0.0;
  for (double v : logits) total += std::exp(v - mx);
  const double lse = mx + std::log(total);

  const double u = rng.uniform();
  double cumulative = 0.0;
  int action = static_cast<int>(logits.size()) - 1;
  for (std::size_t a = 0; a < logits.size(); ++a) {
    cumulative += std::exp(logits[a] - lse);
    if (u < cumulative) {
      action = static_cast<int>(a);
      break;
    }
  }
  // Guard against rounding pushing u past the cumulative mass onto a
  // zero-probability trailing action.
  while (action > 0 && std::exp(logits[static_cast<std::size_t>(action)] - lse) == 0.0) --action;
  ActResult result;
  result.action = action;
  result.log_prob = logits[static_cast<std::size_t>(action)] - lse;
  result.value_ext = out.value_ext[0];
  result.value_int = out.value_int[0];
  return result;
}

}  // namespace poer::agent
