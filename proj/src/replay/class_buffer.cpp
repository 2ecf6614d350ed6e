#include "poer/replay/class_buffer.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "poer/common/error.hpp"

namespace poer::replay {

ClassBuffer::ClassBuffer(std::size_t capacity, double drop_probability, std::uint64_t cursor)
    : capacity_(capacity), drop_probability_(drop_probability), cursor_(cursor) {
  if (capacity == 0) throw ConfigError("class buffer capacity must be positive");
  if (!(drop_probability >= 0.0 && drop_probability <= 1.0)) {
    throw ConfigError("drop probability must lie in [0, 1]");
  }
  slots_.reserve(capacity);
}

EvictionReport ClassBuffer::insert(Batch batch, Rng& rng) {
  if (!std::isfinite(batch.priority) || batch.priority < 0.0) {
    throw NumericalFault("class buffer: priority must be finite and non-negative");
  }
  batch.insertion_index = next_insertion_++;
  EvictionReport report;
  if (!full()) {
    report.slot = slots_.size();
    slots_.push_back(std::make_shared<const Batch>(std::move(batch)));
    return report;
  }
  const double p = rng.uniform();
  std::size_t victim = 0;
  if (p < drop_probability_) {
    for (std::size_t i = 1; i < slots_.size(); ++i) {
      if (slots_[i]->priority < slots_[victim]->priority) victim = i;
    }
    report.prioritized_drop = true;
  } else {
    victim = static_cast<std::size_t>(cursor_ % capacity_);
    ++cursor_;
  }
  report.evicted = true;
  report.slot = victim;
  report.evicted_priority = slots_[victim]->priority;
  report.evicted_insertion_index = slots_[victim]->insertion_index;
  slots_[victim] = std::make_shared<const Batch>(std::move(batch));
  return report;
}

std::optional<std::size_t> ClassBuffer::sample_slot(Rng& rng) const {
  if (slots_.empty()) return std::nullopt;
  double total = 0.0;
  for (const auto& s : slots_) total += s->priority;
  if (!(total > 0.0)) return rng.uniform_index(slots_.size());
  const double z = rng.uniform() * total;
  double prefix = 0.0;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    prefix += slots_[i]->priority;
    if (prefix > z) return i;
  }
  // Rounding can leave z at the very top of the range; take the last slot
  // with mass.
  for (std::size_t i = slots_.size(); i-- > 0;) {
    if (slots_[i]->priority > 0.0) return i;
  }
  return slots_.size() - 1;
}

std::shared_ptr<const Batch> ClassBuffer::sample_batch(Rng& rng) const {
  auto slot = sample_slot(rng);
  if (!slot) return nullptr;
  return slots_[*slot];
}

bool ClassBuffer::replace_if_current(std::size_t slot,
                                     const std::shared_ptr<const Batch>& expected,
                                     Batch refreshed) {
  if (slot >= slots_.size() || slots_[slot] != expected) return false;
  if (!std::isfinite(refreshed.priority) || refreshed.priority < 0.0) {
    throw NumericalFault("class buffer: refreshed priority must be finite and non-negative");
  }
  refreshed.insertion_index = expected->insertion_index;
  slots_[slot] = std::make_shared<const Batch>(std::move(refreshed));
  return true;
}

std::vector<double> ClassBuffer::priorities() const {
  std::vector<double> out;
  out.reserve(slots_.size());
  for (const auto& s : slots_) out.push_back(s->priority);
  return out;
}

std::string ClassBuffer::dump(ImportanceClass cls) const {
  std::ostringstream os;
  os.precision(17);
  os << "slot\tepisode_id\tpriority\tclass\n";
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    os << i << '\t' << slots_[i]->episode_id << '\t' << slots_[i]->priority << '\t'
       << to_string(cls) << '\n';
  }
  return os.str();
}

}  // namespace poer::replay
