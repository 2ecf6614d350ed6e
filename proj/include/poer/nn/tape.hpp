#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "poer/nn/tensor.hpp"

namespace poer::nn {

// Position of a trainable tensor in its owner's flat parameter list.
using ParamId = std::size_t;

// Gradient per parameter; keys are the ParamIds registered on the tape.
using Gradients = std::map<ParamId, Tensor>;

// Handle to a node on a Tape. Only meaningful for the tape that produced it.
struct Var {
  std::size_t index = 0;
};

// Reverse-mode gradient tape over the handful of batched ops the agent and
// RND losses need. Per-row quantities are [N,1] columns; elementwise ops
// require identical shapes (no broadcasting beyond add_bias).
class Tape {
 public:
  Var constant(Tensor value);
  // Records a copy of a parameter tensor under `id`.
  Var parameter(const Tensor& value, ParamId id);

  const Tensor& value(Var v) const { return nodes_[v.index].value; }
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);     // [N,K] x [K,M] -> [N,M]
  Var add_bias(Var x, Var b);   // [N,M] + [M] (row broadcast)
  Var relu(Var x);
  Var tanh(Var x);
  Var exp(Var x);
  Var square(Var x);
  Var softmax(Var x);           // row-wise
  Var log_softmax(Var x);       // row-wise, numerically stable
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  Var mul_const(Var a, const Tensor& factor);
  Var clip(Var x, double lo, double hi);
  Var minimum(Var a, Var b);
  Var maximum(Var a, Var b);
  Var gather_cols(Var x, std::span<const int> columns);  // [N,A] -> [N,1]
  Var row_sum(Var x);           // [N,D] -> [N,1]
  Var sum(Var x);               // -> [1]
  Var mean(Var x);              // -> [1]

  // Gradients of a [1]-shaped loss for every parameter recorded on this tape.
  // Parameters the loss does not depend on receive zero tensors.
  Gradients backward(Var loss);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&, const Node&)> backprop;
    std::optional<ParamId> param;
  };

  Var push(Tensor value, std::function<void(Tape&, const Node&)> backprop);
  Tensor& grad_of(std::size_t index);
  void require_same_shape(Var a, Var b, const char* op) const;

  std::vector<Node> nodes_;
};

inline Gradients backward(Tape& tape, Var loss) { return tape.backward(loss); }

}  // namespace poer::nn
