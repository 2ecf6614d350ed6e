#include "poer/replay/replay.hpp"

#include <cmath>
#include <sstream>

#include "poer/common/error.hpp"

namespace poer::replay {

void ReplayConfig::validate() const {
  if (capacity == 0) throw ConfigError("replay.capacity must be positive");
  if (!(drop_probability >= 0.0 && drop_probability <= 1.0)) {
    throw ConfigError("replay.drop_probability must lie in [0, 1]");
  }
  if (!(replay_ratio >= 0.0) || !std::isfinite(replay_ratio)) {
    throw ConfigError("replay.replay_ratio must be finite and non-negative");
  }
  if (!(novelty_decay >= 0.0 && novelty_decay < 1.0)) {
    throw ConfigError("replay.novelty_decay must lie in [0, 1)");
  }
}

ReplayScheduler::ReplayScheduler(double replay_ratio) : replay_ratio_(replay_ratio) {
  if (!(replay_ratio >= 0.0)) throw ConfigError("replay ratio must be non-negative");
}

void NoveltyThreshold::observe(double novelty) {
  if (!average_) {
    average_ = novelty;
  } else {
    *average_ = decay_ * *average_ + (1.0 - decay_) * novelty;
  }
}

void PendingEpisode::add(Batch batch) {
  any_positive_reward_ = any_positive_reward_ || batch.has_positive_extrinsic();
  batches_.push_back(std::move(batch));
}

std::vector<PendingEpisode::Classified> PendingEpisode::flush(NoveltyThreshold& novelty) {
  std::vector<Classified> out(batches_.size());
  // Walk backwards to learn whether any later batch was rewarded, then
  // classify in collection order so the novelty average evolves naturally.
  std::vector<bool> later_reward(batches_.size(), false);
  bool seen = false;
  for (std::size_t i = batches_.size(); i-- > 0;) {
    later_reward[i] = seen;
    seen = seen || batches_[i].has_positive_extrinsic();
  }
  for (std::size_t i = 0; i < batches_.size(); ++i) {
    out[i].importance_class = classify(batches_[i], later_reward[i], novelty.threshold());
    novelty.observe(batches_[i].intrinsic_sum());
    out[i].batch = std::move(batches_[i]);
    out[i].batch.importance_class = out[i].importance_class;
  }
  clear();
  return out;
}

void PendingEpisode::clear() {
  batches_.clear();
  any_positive_reward_ = false;
}

std::optional<SampledBatch> sample_for_replay(
    const std::array<ClassBuffer, kClassCount>& buffers, Rng& rng) {
  std::array<std::size_t, kClassCount> candidates{};
  std::size_t n = 0;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    if (!buffers[c].empty()) candidates[n++] = c;
  }
  if (n == 0) return std::nullopt;
  const std::size_t c = candidates[n == 1 ? 0 : rng.uniform_index(n)];
  const auto slot = buffers[c].sample_slot(rng);
  return SampledBatch{static_cast<ImportanceClass>(c), *slot, buffers[c].at(*slot)};
}

ExperienceReplay::ExperienceReplay(const ReplayConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  Rng root(seed);
  for (std::size_t c = 0; c < kClassCount; ++c) {
    buffers_[c] = ClassBuffer(config_.capacity, config_.drop_probability);
    insert_rngs_[c] = root.split();
  }
}

EvictionReport ExperienceReplay::insert(ImportanceClass cls, Batch batch) {
  const auto c = static_cast<std::size_t>(cls);
  batch.importance_class = cls;
  std::lock_guard lock(locks_[c]);
  return buffers_[c].insert(std::move(batch), insert_rngs_[c]);
}

std::optional<SampledBatch> ExperienceReplay::sample(Rng& rng) {
  // Lock all three so the non-empty set and the within-buffer draw agree.
  std::scoped_lock lock(locks_[0], locks_[1], locks_[2]);
  return sample_for_replay(buffers_, rng);
}

bool ExperienceReplay::refresh(const SampledBatch& sampled, Batch refreshed) {
  const auto c = static_cast<std::size_t>(sampled.importance_class);
  std::lock_guard lock(locks_[c]);
  return buffers_[c].replace_if_current(sampled.slot, sampled.batch, std::move(refreshed));
}

std::array<std::size_t, kClassCount> ExperienceReplay::sizes() const {
  std::array<std::size_t, kClassCount> out{};
  for (std::size_t c = 0; c < kClassCount; ++c) {
    std::lock_guard lock(locks_[c]);
    out[c] = buffers_[c].size();
  }
  return out;
}

std::size_t ExperienceReplay::total_size() const {
  std::size_t n = 0;
  for (auto s : sizes()) n += s;
  return n;
}

std::array<ClassBuffer, kClassCount> ExperienceReplay::snapshot() const {
  std::array<ClassBuffer, kClassCount> out;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    std::lock_guard lock(locks_[c]);
    out[c] = buffers_[c];
  }
  return out;
}

std::string ExperienceReplay::dump() const {
  std::ostringstream os;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    std::lock_guard lock(locks_[c]);
    const auto cls = static_cast<ImportanceClass>(c);
    os << "# " << to_string(cls) << " (" << buffers_[c].size() << "/" << buffers_[c].capacity()
       << ")\n"
       << buffers_[c].dump(cls);
  }
  return os.str();
}

}  // namespace poer::replay
