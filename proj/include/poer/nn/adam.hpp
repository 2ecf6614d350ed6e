#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "poer/nn/tape.hpp"
#include "poer/nn/tensor.hpp"

namespace poer::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moments are indexed by ParamId, i.e. by position
// in the parameter list given at construction. Parameters without an entry in
// the gradient map are skipped entirely (their moments do not decay).
class AdamState {
 public:
  AdamState(AdamConfig config, std::span<Tensor* const> params);

  const AdamConfig& config() const { return config_; }
  std::uint64_t step_count() const { return step_; }

  void step(std::span<Tensor* const> params, const Gradients& grads);

  // Hogwild variant: every scalar of params and moments is read and written
  // through relaxed atomics, so concurrent callers never tear a value but may
  // interleave updates.
  void step_shared(std::span<Tensor* const> params, const Gradients& grads);

  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  template <bool kShared>
  void apply(std::span<Tensor* const> params, const Gradients& grads);

  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::uint64_t step_ = 0;
};

}  // namespace poer::nn
