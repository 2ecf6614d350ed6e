#pragma once

#include "poer/envs/env.hpp"

namespace poer::agent {

// One environment step as recorded by a worker. `next_observation` is the
// observation the intrinsic reward scores; it also bootstraps the final step
// of a batch.
struct RolloutStep {
  envs::StackedObs observation;
  envs::StackedObs next_observation;
  int action = 0;
  double log_prob_old = 0.0;
  double value_ext = 0.0;
  double value_int = 0.0;
  double reward_ext = 0.0;
  double reward_int = 0.0;
  bool done = false;
};

}  // namespace poer::agent
