#include "poer/replay/refresh.hpp"

#include <vector>

namespace poer::replay {

Batch refresh_priority(const Batch& batch, const rnd::RndPair& rnd) {
  Batch out = batch;
  if (out.steps.empty()) {
    out.priority = 0.0;
    return out;
  }
  std::vector<envs::StackedObs> next;
  next.reserve(out.steps.size());
  for (const auto& s : out.steps) next.push_back(s.next_observation);
  const auto rewards = rnd::intrinsic_rewards(rnd, next);
  for (std::size_t i = 0; i < out.steps.size(); ++i) out.steps[i].reward_int = rewards[i];
  out.priority = compute_priority(out, PriorityMode::kIntrinsic);
  return out;
}

}  // namespace poer::replay
