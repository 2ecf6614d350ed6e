#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "poer/common/rng.hpp"
#include "poer/envs/env.hpp"
#include "poer/nn/mlp.hpp"
#include "poer/nn/tape.hpp"

namespace poer::agent {

struct PolicyConfig {
  std::size_t input_length = 0;
  int action_count = 0;
  std::size_t hidden_units = 64;
  std::size_t hidden_layers = 2;
};

// Shared ReLU trunk feeding a policy head (action logits) and two scalar
// critic heads, one for extrinsic and one for intrinsic value.
struct PolicyNet {
  nn::MlpParams trunk;
  nn::DenseLayer policy_head;
  nn::DenseLayer value_head_ext;
  nn::DenseLayer value_head_int;

  static PolicyNet create(const PolicyConfig& config, Rng& rng);

  int action_count() const { return static_cast<int>(policy_head.out_size()); }
  std::size_t input_length() const { return trunk.input_size(); }
  // Trunk tensors, then policy, extrinsic and intrinsic head (weight, bias).
  std::size_t param_count() const { return trunk.param_count() + 6; }
};

std::vector<nn::Tensor*> parameters(PolicyNet& net);
std::vector<const nn::Tensor*> parameters(const PolicyNet& net);
std::uint64_t checksum(const PolicyNet& net);

struct PolicyOutput {
  nn::Tensor logits;  // [N, A]
  std::vector<double> value_ext;
  std::vector<double> value_int;
};

PolicyOutput evaluate(const PolicyNet& net, const nn::Tensor& observations);

struct PolicyVars {
  nn::Var logits;     // [N, A]
  nn::Var value_ext;  // [N, 1]
  nn::Var value_int;  // [N, 1]
};

// Records the network on `tape`; parameters take ParamIds first_id.. in the
// order given by parameters(PolicyNet&).
PolicyVars evaluate(nn::Tape& tape, const PolicyNet& net, nn::ParamId first_id, nn::Var observations);

struct ActResult {
  int action = 0;
  double log_prob = 0.0;
  double value_ext = 0.0;
  double value_int = 0.0;
};

// Samples an action from softmax(logits) for one stacked observation.
ActResult act(const PolicyNet& net, std::span<const double> observation, Rng& rng);

// Stacks observations into an [N, width] tensor.
nn::Tensor stack_rows(std::span<const envs::StackedObs> observations);

}  // namespace poer::agent
