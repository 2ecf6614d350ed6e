#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "poer/common/rng.hpp"
#include "poer/nn/tape.hpp"
#include "poer/nn/tensor.hpp"

namespace poer::nn {

enum class Activation { kIdentity, kRelu, kTanh, kSoftmax };

// Fully connected layer; weight is [in, out], bias is [out].
struct DenseLayer {
  Tensor weight;
  Tensor bias;
  Activation activation = Activation::kIdentity;

  std::size_t in_size() const { return weight.rows(); }
  std::size_t out_size() const { return weight.cols(); }
};

// Feed-forward stack. Dropout (inverted) follows every hidden layer's
// activation and is active only in train mode.
struct MlpParams {
  std::vector<DenseLayer> layers;
  double dropout_rate = 0.0;

  std::size_t input_size() const;
  std::size_t output_size() const;
  // Two tensors (weight, bias) per layer.
  std::size_t param_count() const { return 2 * layers.size(); }

  // Throws ConfigError on broken layer chaining or a bad dropout rate.
  void validate() const;
};

// `sizes` = {input, hidden..., output}. He-normal init for ReLU layers,
// LeCun-normal otherwise; biases start at zero.
MlpParams make_mlp(std::span<const std::size_t> sizes, Activation hidden, Activation output,
                   double dropout_rate, Rng& rng);

// Weight/bias pointers in ParamId order (layer 0 weight, layer 0 bias, ...).
std::vector<Tensor*> parameters(MlpParams& mlp);
std::vector<const Tensor*> parameters(const MlpParams& mlp);

// Plain forward pass on [N, in] (or [in]) input; returns [N, out].
// `rng` is required only when train_mode is set and dropout_rate > 0.
Tensor forward_mlp(const MlpParams& mlp, const Tensor& input, bool train_mode = false,
                   Rng* rng = nullptr);

// Same computation recorded on a tape. Layer l's weight gets ParamId
// first_id + 2l and its bias first_id + 2l + 1. With the same rng state the
// dropout masks are identical to the plain path.
Var forward_mlp(Tape& tape, const MlpParams& mlp, ParamId first_id, Var input,
                bool train_mode = false, Rng* rng = nullptr);

// Inverted-dropout mask for `shape`: entries are 0 or 1/(1-rate); all zero
// when rate >= 1.
Tensor dropout_mask(const std::vector<std::size_t>& shape, double rate, Rng& rng);

std::uint64_t checksum(const MlpParams& mlp);

}  // namespace poer::nn
