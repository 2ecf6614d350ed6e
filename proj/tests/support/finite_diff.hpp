#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "poer/nn/tape.hpp"
#include "poer/nn/tensor.hpp"

namespace poer::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t entries = 0;
  std::string worst;
};

// Relative error with an absolute floor so that tiny gradients compare by
// absolute difference.
inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
  return std::abs(analytic - numeric) / scale;
}

// Central finite differences on every scalar of every parameter. `loss`
// evaluates the scalar loss from the (perturbed) parameters; it must not
// consume randomness differently between calls.
inline GradCheckResult check_gradients(std::span<nn::Tensor* const> params,
                                       const nn::Gradients& analytic,
                                       const std::function<double()>& loss, double h = 1e-5) {
  GradCheckResult result;
  for (std::size_t id = 0; id < params.size(); ++id) {
    nn::Tensor& p = *params[id];
    const auto it = analytic.find(id);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + h;
      const double up = loss();
      p[i] = saved - h;
      const double down = loss();
      p[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = it == analytic.end() ? 0.0 : it->second[i];
      const double err = relative_error(a, numeric);
      ++result.entries;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = "param " + std::to_string(id) + "[" + std::to_string(i) +
                       "] analytic=" + std::to_string(a) + " numeric=" + std::to_string(numeric);
      }
    }
  }
  return result;
}

}  // namespace poer::testing
