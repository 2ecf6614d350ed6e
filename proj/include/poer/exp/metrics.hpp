#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace poer::exp {

enum class TimeAxis { kUpdates, kSteps };

std::string_view to_string(TimeAxis axis);
TimeAxis parse_time_axis(std::string_view text);

struct EpisodeSummary {
  double extrinsic_reward = 0.0;     // cumulative (clipped) extrinsic reward
  std::uint64_t length = 0;          // environment steps
  double extrinsic_value_mean = 0.0; // mean extrinsic critic value over the steps

  double reward_per_step() const {
    return length == 0 ? 0.0 : extrinsic_reward / static_cast<double>(length);
  }
};

// One CSV row: the state of the sliding window after an episode finished.
struct MetricsRecord {
  double time_axis = 0.0;
  std::uint64_t updates = 0;
  std::uint64_t steps = 0;
  double extrinsic_reward_mean = 0.0;
  double extrinsic_reward_std = 0.0;
  double extrinsic_reward_per_step_mean = 0.0;
  double extrinsic_reward_per_step_std = 0.0;
  double extrinsic_value_per_step_mean = 0.0;
  double extrinsic_value_per_step_std = 0.0;

  bool operator==(const MetricsRecord&) const = default;
};

// Population mean and standard deviation.
struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};
MeanStd mean_std(const std::vector<double>& values);

// Append-only, thread-safe collector. Keeps the raw episode series and emits
// one record per episode with statistics over the last `window` episodes.
class MetricsSink {
 public:
  static constexpr std::size_t kDefaultWindow = 50;

  explicit MetricsSink(TimeAxis axis = TimeAxis::kUpdates, std::size_t window = kDefaultWindow);

  // Time axis values must be non-decreasing.
  MetricsRecord record(const EpisodeSummary& episode, std::uint64_t updates, std::uint64_t steps);

  std::vector<MetricsRecord> records() const;
  std::vector<EpisodeSummary> episodes() const;
  std::size_t size() const;
  TimeAxis axis() const { return axis_; }
  std::size_t window() const { return window_; }

 private:
  TimeAxis axis_;
  std::size_t window_;
  mutable std::mutex mutex_;
  std::deque<EpisodeSummary> recent_;
  std::vector<EpisodeSummary> episodes_;
  std::vector<MetricsRecord> records_;
};

inline constexpr std::string_view kCsvHeader =
    "time_axis,updates,steps,extrinsic_reward_mean,extrinsic_reward_std,"
    "extrinsic_reward_per_step_mean,extrinsic_reward_per_step_std,"
    "extrinsic_value_per_step_mean,extrinsic_value_per_step_std";

// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

void write_csv(std::ostream& out, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> parse_csv(std::istream& in);
void save_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> load_csv(const std::filesystem::path& path);

}  // namespace poer::exp
