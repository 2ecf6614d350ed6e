#include "poer/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "poer/common/error.hpp"

namespace poer::nn {

namespace {

void row_log_softmax(std::span<const double> in, std::span<double> out) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : in) mx = std::max(mx, v);
  double total = 0.0;
  for (double v : in) total += std::exp(v - mx);
  const double lse = mx + std::log(total);
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] - lse;
}

}  // namespace

Var Tape::push(Tensor value, std::function<void(Tape&, const Node&)> backprop) {
  nodes_.push_back(Node{std::move(value), Tensor{}, std::move(backprop), std::nullopt});
  return Var{nodes_.size() - 1};
}

Tensor& Tape::grad_of(std::size_t index) {
  auto& node = nodes_[index];
  if (node.grad.size() != node.value.size() || !node.grad.same_shape(node.value)) {
    node.grad = Tensor(node.value.shape(), 0.0);
  }
  return node.grad;
}

void Tape::require_same_shape(Var a, Var b, const char* op) const {
  if (!value(a).same_shape(value(b))) {
    throw ConfigError(std::string(op) + ": shape mismatch " + value(a).shape_string() + " vs " +
                      value(b).shape_string());
  }
}

Var Tape::constant(Tensor value) { return push(std::move(value), nullptr); }

Var Tape::parameter(const Tensor& value, ParamId id) {
  auto v = push(value, nullptr);
  nodes_[v.index].param = id;
  return v;
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& w = value(b);
  if (x.cols() != w.rows() || w.rank() != 2) {
    throw ConfigError("matmul: cannot multiply " + x.shape_string() + " by " + w.shape_string());
  }
  const std::size_t n = x.rows(), k = x.cols(), m = w.cols();
  Tensor out({n, m}, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double* o = &out[r * m];
    for (std::size_t j = 0; j < k; ++j) {
      const double xv = x[r * k + j];
      if (xv == 0.0) continue;
      const double* wr = &w[j * m];
      for (std::size_t c = 0; c < m; ++c) o[c] += xv * wr[c];
    }
  }
  const std::size_t ia = a.index, ib = b.index;
  return push(std::move(out), [ia, ib, n, k, m](Tape& t, const Node& self) {
    const Tensor& dy = self.grad;
    {
      Tensor& dx = t.grad_of(ia);
      const Tensor& w = t.nodes_[ib].value;
      for (std::size_t r = 0; r < n; ++r) {
        const double* g = &dy[r * m];
        for (std::size_t j = 0; j < k; ++j) {
          const double* wr = &w[j * m];
          double acc = 0.0;
          for (std::size_t c = 0; c < m; ++c) acc += g[c] * wr[c];
          dx[r * k + j] += acc;
        }
      }
    }
    {
      Tensor& dw = t.grad_of(ib);
      const Tensor& x = t.nodes_[ia].value;
      for (std::size_t r = 0; r < n; ++r) {
        const double* g = &dy[r * m];
        for (std::size_t j = 0; j < k; ++j) {
          const double xv = x[r * k + j];
          if (xv == 0.0) continue;
          double* dwr = &dw[j * m];
          for (std::size_t c = 0; c < m; ++c) dwr[c] += xv * g[c];
        }
      }
    }
  });
}

Var Tape::add_bias(Var x, Var b) {
  const Tensor& in = value(x);
  const Tensor& bias = value(b);
  if (bias.size() != in.cols()) {
    throw ConfigError("add_bias: bias " + bias.shape_string() + " vs input " + in.shape_string());
  }
  Tensor out = in;
  const std::size_t n = in.rows(), m = in.cols();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] += bias[c];
  }
  const std::size_t ix = x.index, ib = b.index;
  return push(std::move(out), [ix, ib, n, m](Tape& t, const Node& self) {
    Tensor& dx = t.grad_of(ix);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i];
    Tensor& db = t.grad_of(ib);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < m; ++c) db[c] += self.grad[r * m + c];
    }
  });
}

Var Tape::relu(Var x) {
  Tensor out = value(x);
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  const std::size_t ix = x.index;
  return push(std::move(out), [ix](Tape& t, const Node& self) {
    Tensor& dx = t.grad_of(ix);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (self.value[i] > 0.0) dx[i] += self.grad[i];
    }
  });
}

Var Tape::tanh(Var x) {
  Tensor out = value(x);
  for (auto& v : out.data()) v = std::tanh(v);
  const std::size_t ix = x.index;
  return push(std::move(out), [ix](Tape& t, const Node& self) {
    Tensor& dx = t.grad_of(ix);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      dx[i] += self.grad[i] * (1.0 - self.value[i] * self.value[i]);
    }
  });
}

Var Tape::exp(Var x) {
  Tensor out = value(x);
  for (auto& v : out.data()) v = std::exp(v);
  const std::size_t ix = x.index;
  return push(std::move(out), [ix](Tape& t, const Node& self) {
    Tensor& dx = t.grad_of(ix);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] * self.value[i];
  });
}

Var Tape::square(Var x) {
  Tensor out = value(x);
  for (auto& v : out.data()) v = v * v;
  const std::size_t ix = x.index;
  return push(std::move(out), [ix](Tape& t, const Node& self) {
    Tensor& dx = t.grad_of(ix);
    const Tensor& in = t.nodes_[ix].value;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += 2.0 * in[i] * self.grad[i];
  });
}

Var Tape::log_softmax(Var x) {
  const Tensor& in = value(x);
  Tensor out(in.shape(), 0.0);
  for (std::size_t r = 0; r < in.rows(); ++r) row_log_softmax(in.row(r), out.row(r));
  const std::size_t ix = x.index;
  return push(std::move(out), [ix](Tape& t, const Node& self) {
    Tensor& dx = t.grad_of(ix);
    const std::size_t m = self.value.cols();
    for (std::size_t r = 0; r < self.value.rows(); ++r) {
      double gsum = 0.0;
      for (std::size_t c = 0; c < m; ++c) gsum += self.grad[r * m + c];
      for (std::size_t c = 0; c < m; ++c) {
        dx[r * m + c] += self.grad[r * m + c] - std::exp(self.value[r * m + c]) * gsum;
      }
    }
  });
}

Var Tape::softmax(Var x) {
  const Tensor& in = value(x);
  Tensor out(in.shape(), 0.0);
  for (std::size_t r = 0; r < in.rows(); ++r) {
    auto o = out.row(r);
    row_log_softmax(in.row(r), o);
    for (auto& v : o) v = std::exp(v);
  }
  const std::size_t ix = x.index;
  return push(std::move(out), [ix](Tape& t, const Node& self) {
    Tensor& dx = t.grad_of(ix);
    const std::size_t m = self.value.cols();
    for (std::size_t r = 0; r < self.value.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < m; ++c) dot += self.grad[r * m + c] * self.value[r * m + c];
      for (std::size_t c = 0; c < m; ++c) {
        dx[r * m + c] += self.value[r * m + c] * (self.grad[r * m + c] - dot);
      }
    }
  });
}

Var Tape::add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out = value(a);
  const Tensor& rhs = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += rhs[i];
  const std::size_t ia = a.index, ib = b.index;
  return push(std::move(out), [ia, ib](Tape& t, const Node& self) {
    Tensor& da = t.grad_of(ia);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += self.grad[i];
    Tensor& db = t.grad_of(ib);
    for (std::size_t i = 0; i < db.size(); ++i) db[i] += self.grad[i];
  });
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out = value(a);
  const Tensor& rhs = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= rhs[i];
  const std::size_t ia = a.index, ib = b.index;
  return push(std::move(out), [ia, ib](Tape& t, const Node& self) {
    Tensor& da = t.grad_of(ia);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += self.grad[i];
    Tensor& db = t.grad_of(ib);
    for (std::size_t i = 0; i < db.size(); ++i) db[i] -= self.grad[i];
  });
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor out = value(a);
  const Tensor& rhs = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= rhs[i];
  const std::size_t ia = a.index, ib = b.index;
  return push(std::move(out), [ia, ib](Tape& t, const Node& self) {
    Tensor& da = t.grad_of(ia);
    const Tensor& bv = t.nodes_[ib].value;
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += self.grad[i] * bv[i];
    Tensor& db = t.grad_of(ib);
    const Tensor& av = t.nodes_[ia].value;
    for (std::size_t i = 0; i < db.size(); ++i) db[i] += self.grad[i] * av[i];
  });
}

Var Tape::scale(Var a, double factor) {
  Tensor out = value(a);
  for (auto& v : out.data()) v *= factor;
  const std::size_t ia = a.index;
  return push(std::move(out), [ia, factor](Tape& t, const Node& self) {
    Tensor& da = t.grad_of(ia);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += self.grad[i] * factor;
  });
}

Var Tape::mul_const(Var a, const Tensor& factor) {
  if (!value(a).same_shape(factor)) {
    throw ConfigError("mul_const: shape mismatch " + value(a).shape_string() + " vs " +
                      factor.shape_string());
  }
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor[i];
  const std::size_t ia = a.index;
  return push(std::move(out), [ia, factor](Tape& t, const Node& self) {
    Tensor& da = t.grad_of(ia);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += self.grad[i] * factor[i];
  });
}

Var Tape::clip(Var x, double lo, double hi) {
  Tensor out = value(x);
  for (auto& v : out.data()) v = std::clamp(v, lo, hi);
  const std::size_t ix = x.index;
  return push(std::move(out), [ix, lo, hi](Tape& t, const Node& self) {
    Tensor& dx = t.grad_of(ix);
    const Tensor& in = t.nodes_[ix].value;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (in[i] >= lo && in[i] <= hi) dx[i] += self.grad[i];
    }
  });
}

Var Tape::minimum(Var a, Var b) {
  require_same_shape(a, b, "minimum");
  Tensor out = value(a);
  const Tensor& rhs = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(out[i], rhs[i]);
  const std::size_t ia = a.index, ib = b.index;
  return push(std::move(out), [ia, ib](Tape& t, const Node& self) {
    const Tensor& av = t.nodes_[ia].value;
    const Tensor& bv = t.nodes_[ib].value;
    Tensor& da = t.grad_of(ia);
    Tensor& db = t.grad_of(ib);
    for (std::size_t i = 0; i < da.size(); ++i) {
      if (av[i] <= bv[i]) {
        da[i] += self.grad[i];
      } else {
        db[i] += self.grad[i];
      }
    }
  });
}

Var Tape::maximum(Var a, Var b) {
  require_same_shape(a, b, "maximum");
  Tensor out = value(a);
  const Tensor& rhs = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], rhs[i]);
  const std::size_t ia = a.index, ib = b.index;
  return push(std::move(out), [ia, ib](Tape& t, const Node& self) {
    const Tensor& av = t.nodes_[ia].value;
    const Tensor& bv = t.nodes_[ib].value;
    Tensor& da = t.grad_of(ia);
    Tensor& db = t.grad_of(ib);
    for (std::size_t i = 0; i < da.size(); ++i) {
      if (av[i] >= bv[i]) {
        da[i] += self.grad[i];
      } else {
        db[i] += self.grad[i];
      }
    }
  });
}

Var Tape::gather_cols(Var x, std::span<const int> columns) {
  const Tensor& in = value(x);
  const std::size_t n = in.rows(), m = in.cols();
  if (columns.size() != n) throw ConfigError("gather_cols: one column index per row required");
  std::vector<std::size_t> cols(n);
  Tensor out({n, 1}, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    if (columns[r] < 0 || static_cast<std::size_t>(columns[r]) >= m) {
      throw ConfigError("gather_cols: column index out of range");
    }
    cols[r] = static_cast<std::size_t>(columns[r]);
    out[r] = in[r * m + cols[r]];
  }
  const std::size_t ix = x.index;
  return push(std::move(out), [ix, m, cols = std::move(cols)](Tape& t, const Node& self) {
    Tensor& dx = t.grad_of(ix);
    for (std::size_t r = 0; r < cols.size(); ++r) dx[r * m + cols[r]] += self.grad[r];
  });
}

Var Tape::row_sum(Var x) {
  const Tensor& in = value(x);
  const std::size_t n = in.rows(), m = in.cols();
  Tensor out({n, 1}, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) out[r] += in[r * m + c];
  }
  const std::size_t ix = x.index;
  return push(std::move(out), [ix, m](Tape& t, const Node& self) {
    Tensor& dx = t.grad_of(ix);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i / m];
  });
}

Var Tape::sum(Var x) {
  double total = 0.0;
  for (double v : value(x).data()) total += v;
  const std::size_t ix = x.index;
  return push(Tensor::scalar(total), [ix](Tape& t, const Node& self) {
    Tensor& dx = t.grad_of(ix);
    const double g = self.grad[0];
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g;
  });
}

Var Tape::mean(Var x) {
  const auto n = value(x).size();
  if (n == 0) throw UsageError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Gradients Tape::backward(Var loss) {
  if (loss.index >= nodes_.size()) throw UsageError("backward: loss is not on this tape");
  if (value(loss).shape() != std::vector<std::size_t>{1}) {
    throw UsageError("backward: loss must have shape [1], got " + value(loss).shape_string());
  }
  for (auto& node : nodes_) node.grad = Tensor{};
  grad_of(loss.index)[0] = 1.0;
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.backprop && node.grad.size() == node.value.size() && node.value.size() > 0) {
      node.backprop(*this, node);
    }
  }
  Gradients grads;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& node = nodes_[i];
    if (!node.param) continue;
    auto [it, inserted] = grads.try_emplace(*node.param, node.value.shape(), 0.0);
    if (node.grad.size() == node.value.size() && node.grad.same_shape(node.value)) {
      for (std::size_t j = 0; j < node.grad.size(); ++j) it->second[j] += node.grad[j];
    }
  }
  return grads;
}

}  // namespace poer::nn
