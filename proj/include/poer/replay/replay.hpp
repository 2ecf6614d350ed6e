#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "poer/common/rng.hpp"
#include "poer/replay/batch.hpp"
#include "poer/replay/class_buffer.hpp"

namespace poer::replay {

struct ReplayConfig {
  std::size_t capacity = 128;
  double drop_probability = 1.0;
  double replay_ratio = 0.5;
  PriorityMode priority_mode = PriorityMode::kIntrinsic;
  double novelty_decay = 0.99;

  void validate() const;
};

// Number of old batches replayed after each new one: k ~ Poisson(mu).
class ReplayScheduler {
 public:
  explicit ReplayScheduler(double replay_ratio = 0.5);
  int replay_count(Rng& rng) const { return rng.poisson(replay_ratio_); }
  double replay_ratio() const { return replay_ratio_; }

 private:
  double replay_ratio_;
};

// Exponential moving average of batch novelty; a batch is "novel" when its
// cumulative intrinsic reward exceeds the average of what came before it.
class NoveltyThreshold {
 public:
  explicit NoveltyThreshold(double decay = 0.99) : decay_(decay) {}
  double threshold() const { return average_.value_or(0.0); }
  void observe(double novelty);

 private:
  double decay_;
  std::optional<double> average_;
};

// Batches of the in-progress episode. Classification needs to know whether a
// later batch was rewarded, so it happens once, when the episode ends.
class PendingEpisode {
 public:
  void add(Batch batch);
  bool any_positive_reward() const { return any_positive_reward_; }
  std::size_t size() const { return batches_.size(); }
  bool empty() const { return batches_.empty(); }

  struct Classified {
    Batch batch;
    std::optional<ImportanceClass> importance_class;
  };
  // Classifies every held batch (earliest first, updating `novelty` as it
  // goes) and clears the accumulator.
  std::vector<Classified> flush(NoveltyThreshold& novelty);
  void clear();

 private:
  std::vector<Batch> batches_;
  bool any_positive_reward_ = false;
};

struct SampledBatch {
  ImportanceClass importance_class;
  std::size_t slot = 0;
  std::shared_ptr<const Batch> batch;
};

// Oversampling: picks a class uniformly among the non-empty buffers, then a
// batch proportionally to priority within it.
std::optional<SampledBatch> sample_for_replay(const std::array<ClassBuffer, kClassCount>& buffers,
                                              Rng& rng);

// The three class buffers shared by every worker. Each buffer is guarded by
// its own mutex; insert, sample and refresh are atomic per buffer.
class ExperienceReplay {
 public:
  ExperienceReplay(const ReplayConfig& config, std::uint64_t seed);

  const ReplayConfig& config() const { return config_; }

  EvictionReport insert(ImportanceClass cls, Batch batch);
  std::optional<SampledBatch> sample(Rng& rng);
  // Stores the refreshed copy in place of the sampled one, if it has not been
  // evicted meanwhile.
  bool refresh(const SampledBatch& sampled, Batch refreshed);

  std::array<std::size_t, kClassCount> sizes() const;
  std::size_t total_size() const;
  // Copies of the buffers for inspection (taken under each buffer's lock).
  std::array<ClassBuffer, kClassCount> snapshot() const;
  std::string dump() const;

 private:
  ReplayConfig config_;
  std::array<ClassBuffer, kClassCount> buffers_;
  std::array<Rng, kClassCount> insert_rngs_;
  mutable std::array<std::mutex, kClassCount> locks_;
};

}  // namespace poer::replay
