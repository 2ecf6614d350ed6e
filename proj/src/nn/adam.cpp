#include "poer/nn/adam.hpp"

#include <atomic>
#include <cmath>
#include <string>

#include "poer/common/error.hpp"

namespace poer::nn {

AdamState::AdamState(AdamConfig config, std::span<Tensor* const> params) : config_(config) {
  for (const Tensor* p : params) {
    m_.emplace_back(p->shape(), 0.0);
    v_.emplace_back(p->shape(), 0.0);
  }
}

void AdamState::step(std::span<Tensor* const> params, const Gradients& grads) {
  apply<false>(params, grads);
}

void AdamState::step_shared(std::span<Tensor* const> params, const Gradients& grads) {
  apply<true>(params, grads);
}

template <bool kShared>
void AdamState::apply(std::span<Tensor* const> params, const Gradients& grads) {
  if (params.size() != m_.size()) {
    throw UsageError("adam: optimizer built for " + std::to_string(m_.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  for (const auto& [id, g] : grads) {
    if (id >= params.size()) throw UsageError("adam: gradient for unknown parameter " + std::to_string(id));
    if (!g.same_shape(*params[id])) {
      throw UsageError("adam: gradient shape " + g.shape_string() + " does not match parameter " +
                       params[id]->shape_string());
    }
  }

  std::uint64_t t;
  if constexpr (kShared) {
    t = std::atomic_ref<std::uint64_t>(step_).fetch_add(1, std::memory_order_relaxed) + 1;
  } else {
    t = ++step_;
  }
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t));

  for (const auto& [id, g] : grads) {
    Tensor& p = *params[id];
    Tensor& m = m_[id];
    Tensor& v = v_[id];
    for (std::size_t i = 0; i < p.size(); ++i) {
      double mi, vi, pi;
      if constexpr (kShared) {
        mi = std::atomic_ref<double>(m[i]).load(std::memory_order_relaxed);
        vi = std::atomic_ref<double>(v[i]).load(std::memory_order_relaxed);
        pi = std::atomic_ref<double>(p[i]).load(std::memory_order_relaxed);
      } else {
        mi = m[i];
        vi = v[i];
        pi = p[i];
      }
      mi = b1 * mi + (1.0 - b1) * g[i];
      vi = b2 * vi + (1.0 - b2) * g[i] * g[i];
      const double m_hat = mi / correction1;
      const double v_hat = vi / correction2;
      pi -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
      if constexpr (kShared) {
        std::atomic_ref<double>(m[i]).store(mi, std::memory_order_relaxed);
        std::atomic_ref<double>(v[i]).store(vi, std::memory_order_relaxed);
        std::atomic_ref<double>(p[i]).store(pi, std::memory_order_relaxed);
      } else {
        m[i] = mi;
        v[i] = vi;
        p[i] = pi;
      }
    }
  }
}

template void AdamState::apply<false>(std::span<Tensor* const>, const Gradients&);
template void AdamState::apply<true>(std::span<Tensor* const>, const Gradients&);

}  // namespace poer::nn
