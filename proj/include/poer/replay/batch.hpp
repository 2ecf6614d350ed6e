#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "poer/agent/rollout.hpp"

namespace poer::replay {

enum class ImportanceClass : std::uint8_t {
  kContainsReward = 0,   // some step carries a positive extrinsic reward
  kLeadsToReward = 1,    // a later batch of the same episode is rewarded
  kMayLeadToUnseen = 2,  // high cumulative intrinsic reward
};
inline constexpr std::size_t kClassCount = 3;

std::string_view to_string(ImportanceClass c);

// What a batch's replay priority measures. kIntrinsic is the default; the
// others exist for prioritization ablations.
enum class PriorityMode { kIntrinsic, kUniform, kExtrinsic, kAdvantage };

std::string_view to_string(PriorityMode mode);
PriorityMode parse_priority_mode(std::string_view text);

// B_s consecutive steps of one episode; the unit of storage and replay.
struct Batch {
  std::vector<agent::RolloutStep> steps;
  std::uint64_t episode_id = 0;
  double priority = 0.0;
  std::optional<ImportanceClass> importance_class;
  std::uint64_t insertion_index = 0;
  // Critic values of the last step's next observation, used to bootstrap the
  // returns (episodic returns ignore them when the last step is terminal).
  double bootstrap_ext = 0.0;
  double bootstrap_int = 0.0;

  std::size_t size() const { return steps.size(); }
  double intrinsic_sum() const;
  double extrinsic_sum() const;
  bool has_positive_extrinsic() const;
};

// Priority under `mode`. kAdvantage uses the supplied mixed advantages and is
// floored at zero; the other modes ignore them.
double compute_priority(const Batch& batch, PriorityMode mode,
                        std::span<const double> mixed_advantages = {});

// Importance class for a finished batch, or nullopt when the batch belongs to
// none (it is then not stored). Precedence: ContainsReward, LeadsToReward,
// MayLeadToUnseen. Novelty is the batch's cumulative intrinsic reward.
std::optional<ImportanceClass> classify(const Batch& batch, bool episode_had_later_reward,
                                        double novelty_threshold);

}  // namespace poer::replay
