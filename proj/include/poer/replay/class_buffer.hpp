#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "poer/common/rng.hpp"
#include "poer/replay/batch.hpp"

namespace poer::replay {

struct EvictionReport {
  bool evicted = false;
  std::size_t slot = 0;             // slot the new batch now occupies
  bool prioritized_drop = false;    // true when the minimum-priority slot was chosen
  double evicted_priority = 0.0;
  std::uint64_t evicted_insertion_index = 0;
};

// Fixed-capacity buffer for one importance class. Slots hold immutable batch
// snapshots so a sampled batch stays valid even if its slot is later evicted.
// Not thread-safe; see ExperienceReplay for the shared wrapper.
class ClassBuffer {
 public:
  explicit ClassBuffer(std::size_t capacity = 128, double drop_probability = 1.0,
                       std::uint64_t cursor = 0);

  // Appends while not full. When full, draws p_d ~ U[0,1): if p_d < P_d the
  // minimum-priority slot (lowest index on ties) is replaced, otherwise slot
  // cursor mod B is replaced and the cursor advances. The incoming batch is
  // always stored.
  EvictionReport insert(Batch batch, Rng& rng);

  // Proportional prefix-sum sampling: z ~ U[0, sum), first slot whose
  // inclusive prefix sum exceeds z. Uniform over slots if every priority is
  // zero. nullopt when empty.
  std::optional<std::size_t> sample_slot(Rng& rng) const;
  std::shared_ptr<const Batch> sample_batch(Rng& rng) const;

  std::shared_ptr<const Batch> at(std::size_t slot) const { return slots_.at(slot); }

  // Replaces slot contents with `refreshed` if the slot still holds
  // `expected`; returns whether the update happened.
  bool replace_if_current(std::size_t slot, const std::shared_ptr<const Batch>& expected,
                          Batch refreshed);

  std::size_t size() const { return slots_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return slots_.empty(); }
  bool full() const { return slots_.size() == capacity_; }
  std::uint64_t cursor() const { return cursor_; }
  double drop_probability() const { return drop_probability_; }
  std::vector<double> priorities() const;

  std::string dump(ImportanceClass cls) const;

 private:
  std::size_t capacity_;
  double drop_probability_;
  std::uint64_t cursor_;
  std::uint64_t next_insertion_ = 0;
  std::vector<std::shared_ptr<const Batch>> slots_;
};

}  // namespace poer::replay
