#include "poer/nn/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "poer/common/error.hpp"

namespace poer::nn {

namespace {

void apply_activation(Activation act, Tensor& t) {
  switch (act) {
    case Activation::kIdentity:
      return;
    case Activation::kRelu:
      for (auto& v : t.data()) v = v > 0.0 ? v : 0.0;
      return;
    case Activation::kTanh:
      for (auto& v : t.data()) v = std::tanh(v);
      return;
    case Activation::kSoftmax:
      for (std::size_t r = 0; r < t.rows(); ++r) {
        auto row = t.row(r);
        double mx = -std::numeric_limits<double>::infinity();
        for (double v : row) mx = std::max(mx, v);
        double total = 0.0;
        for (auto& v : row) {
          v = std::exp(v - mx);
          total += v;
        }
        for (auto& v : row) v /= total;
      }
      return;
  }
}

Var activation_on_tape(Tape& tape, Activation act, Var x) {
  switch (act) {
    case Activation::kIdentity:
      return x;
    case Activation::kRelu:
      return tape.relu(x);
    case Activation::kTanh:
      return tape.tanh(x);
    case Activation::kSoftmax:
      return tape.softmax(x);
  }
  return x;
}

bool dropout_active(const MlpParams& mlp, bool train_mode) {
  return train_mode && mlp.dropout_rate > 0.0;
}

}  // namespace

std::size_t MlpParams::input_size() const { return layers.empty() ? 0 : layers.front().in_size(); }

std::size_t MlpParams::output_size() const {
  return layers.empty() ? 0 : layers.back().out_size();
}

void MlpParams::validate() const {
  if (!(dropout_rate >= 0.0 && dropout_rate <= 1.0)) {
    throw ConfigError("dropout_rate must lie in [0,1], got " + std::to_string(dropout_rate));
  }
  if (layers.empty()) throw ConfigError("MLP has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.weight.rank() != 2 || layer.bias.size() != layer.out_size()) {
      throw ConfigError("layer " + std::to_string(l) + " has weight " +
                        layer.weight.shape_string() + " and bias " + layer.bias.shape_string());
    }
    if (l > 0 && layers[l - 1].out_size() != layer.in_size()) {
      throw ConfigError("layer " + std::to_string(l) + " expects " +
                        std::to_string(layer.in_size()) + " inputs but previous layer emits " +
                        std::to_string(layers[l - 1].out_size()));
    }
  }
}

MlpParams make_mlp(std::span<const std::size_t> sizes, Activation hidden, Activation output,
                   double dropout_rate, Rng& rng) {
  if (sizes.size() < 2) throw ConfigError("make_mlp needs at least input and output sizes");
  MlpParams mlp;
  mlp.dropout_rate = dropout_rate;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const bool last = l + 2 == sizes.size();
    DenseLayer layer;
    layer.activation = last ? output : hidden;
    layer.weight = Tensor({sizes[l], sizes[l + 1]}, 0.0);
    layer.bias = Tensor({sizes[l + 1]}, 0.0);
    const double gain = layer.activation == Activation::kRelu ? 2.0 : 1.0;
    const double stddev = std::sqrt(gain / static_cast<double>(sizes[l]));
    for (auto& w : layer.weight.data()) w = rng.normal(0.0, stddev);
    mlp.layers.push_back(std::move(layer));
  }
  mlp.validate();
  return mlp;
}

std::vector<Tensor*> parameters(MlpParams& mlp) {
  std::vector<Tensor*> out;
  for (auto& layer : mlp.layers) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

std::vector<const Tensor*> parameters(const MlpParams& mlp) {
  std::vector<const Tensor*> out;
  for (const auto& layer : mlp.layers) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

Tensor dropout_mask(const std::vector<std::size_t>& shape, double rate, Rng& rng) {
  Tensor mask(shape, 0.0);
  if (rate >= 1.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (auto& m : mask.data()) m = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

Tensor forward_mlp(const MlpParams& mlp, const Tensor& input, bool train_mode, Rng* rng) {
  mlp.validate();
  if (input.cols() != mlp.input_size()) {
    throw ConfigError("forward_mlp: input width " + std::to_string(input.cols()) +
                      " but network expects " + std::to_string(mlp.input_size()));
  }
  if (dropout_active(mlp, train_mode) && rng == nullptr) {
    throw UsageError("forward_mlp: train-mode dropout needs an rng");
  }
  const std::size_t n = input.rows();
  Tensor x = input.rank() == 2 ? input : Tensor({1, input.cols()}, std::vector(input.data().begin(), input.data().end()));
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const auto& layer = mlp.layers[l];
    const std::size_t k = layer.in_size(), m = layer.out_size();
    Tensor out({n, m}, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      double* o = &out[r * m];
      for (std::size_t c = 0; c < m; ++c) o[c] = layer.bias[c];
      for (std::size_t j = 0; j < k; ++j) {
        const double xv = x[r * k + j];
        if (xv == 0.0) continue;
        const double* w = &layer.weight[j * m];
        for (std::size_t c = 0; c < m; ++c) o[c] += xv * w[c];
      }
    }
    apply_activation(layer.activation, out);
    const bool hidden = l + 1 < mlp.layers.size();
    if (hidden && dropout_active(mlp, train_mode)) {
      const Tensor mask = dropout_mask(out.shape(), mlp.dropout_rate, *rng);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    }
    x = std::move(out);
  }
  return x;
}

Var forward_mlp(Tape& tape, const MlpParams& mlp, ParamId first_id, Var input, bool train_mode,
                Rng* rng) {
  mlp.validate();
  if (tape.value(input).cols() != mlp.input_size()) {
    throw ConfigError("forward_mlp: input width " + std::to_string(tape.value(input).cols()) +
                      " but network expects " + std::to_string(mlp.input_size()));
  }
  if (dropout_active(mlp, train_mode) && rng == nullptr) {
    throw UsageError("forward_mlp: train-mode dropout needs an rng");
  }
  Var x = input;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const auto& layer = mlp.layers[l];
    Var w = tape.parameter(layer.weight, first_id + 2 * l);
    Var b = tape.parameter(layer.bias, first_id + 2 * l + 1);
    x = activation_on_tape(tape, layer.activation, tape.add_bias(tape.matmul(x, w), b));
    const bool hidden = l + 1 < mlp.layers.size();
    if (hidden && dropout_active(mlp, train_mode)) {
      x = tape.mul_const(x, dropout_mask(tape.value(x).shape(), mlp.dropout_rate, *rng));
    }
  }
  return x;
}

std::uint64_t checksum(const MlpParams& mlp) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto* t : parameters(mlp)) h = checksum(*t, h);
  return h;
}

}  // namespace poer::nn
