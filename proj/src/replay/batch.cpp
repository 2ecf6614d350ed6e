#include "poer/replay/batch.hpp"

#include <algorithm>
#include <string>

#include "poer/common/error.hpp"

namespace poer::replay {

std::string_view to_string(ImportanceClass c) {
  switch (c) {
    case ImportanceClass::kContainsReward: return "contains_reward";
    case ImportanceClass::kLeadsToReward: return "leads_to_reward";
    case ImportanceClass::kMayLeadToUnseen: return "may_lead_to_unseen";
  }
  return "unknown";
}

std::string_view to_string(PriorityMode mode) {
  switch (mode) {
    case PriorityMode::kIntrinsic: return "intrinsic";
    case PriorityMode::kUniform: return "uniform";
    case PriorityMode::kExtrinsic: return "extrinsic";
    case PriorityMode::kAdvantage: return "advantage";
  }
  return "unknown";
}

PriorityMode parse_priority_mode(std::string_view text) {
  if (text == "intrinsic") return PriorityMode::kIntrinsic;
  if (text == "uniform") return PriorityMode::kUniform;
  if (text == "extrinsic") return PriorityMode::kExtrinsic;
  if (text == "advantage") return PriorityMode::kAdvantage;
  throw ConfigError("unknown priority mode '" + std::string(text) + "'");
}

double Batch::intrinsic_sum() const {
  double s = 0.0;
  for (const auto& st : steps) s += st.reward_int;
  return s;
}

double Batch::extrinsic_sum() const {
  double s = 0.0;
  for (const auto& st : steps) s += st.reward_ext;
  return s;
}

bool Batch::has_positive_extrinsic() const {
  return std::any_of(steps.begin(), steps.end(),
                     [](const agent::RolloutStep& s) { return s.reward_ext > 0.0; });
}

double compute_priority(const Batch& batch, PriorityMode mode,
                        std::span<const double> mixed_advantages) {
  switch (mode) {
    case PriorityMode::kIntrinsic: return std::max(0.0, batch.intrinsic_sum());
    case PriorityMode::kUniform: return 1.0;
    // Clipped rewards are in [-1, 1]; negative sums carry no replay mass.
    case PriorityMode::kExtrinsic: return std::max(0.0, batch.extrinsic_sum());
    case PriorityMode::kAdvantage: {
      if (mixed_advantages.size() != batch.size()) {
        throw UsageError("compute_priority: advantage count does not match batch size");
      }
      double s = 0.0;
      for (double a : mixed_advantages) s += a;
      return std::max(0.0, s);
    }
  }
  return 0.0;
}

std::optional<ImportanceClass> classify(const Batch& batch, bool episode_had_later_reward,
                                        double novelty_threshold) {
  if (batch.has_positive_extrinsic()) return ImportanceClass::kContainsReward;
  if (episode_had_later_reward) return ImportanceClass::kLeadsToReward;
  if (batch.intrinsic_sum() > novelty_threshold) return ImportanceClass::kMayLeadToUnseen;
  return std::nullopt;
}

}  // namespace poer::replay
