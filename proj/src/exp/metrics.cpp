#include "poer/exp/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "poer/common/error.hpp"

namespace poer::exp {

std::string_view to_string(TimeAxis axis) {
  return axis == TimeAxis::kUpdates ? "updates" : "steps";
}

TimeAxis parse_time_axis(std::string_view text) {
  if (text == "updates") return TimeAxis::kUpdates;
  if (text == "steps") return TimeAxis::kSteps;
  throw ConfigError("unknown time axis '" + std::string(text) + "'");
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) return {};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

MetricsSink::MetricsSink(TimeAxis axis, std::size_t window) : axis_(axis), window_(window) {
  if (window == 0) throw ConfigError("metrics window must be positive");
}

MetricsRecord MetricsSink::record(const EpisodeSummary& episode, std::uint64_t updates,
                                  std::uint64_t steps) {
  std::lock_guard lock(mutex_);
  const double t = static_cast<double>(axis_ == TimeAxis::kUpdates ? updates : steps);
  if (!records_.empty() && t < records_.back().time_axis) {
    throw UsageError("metrics time axis went backwards");
  }
  episodes_.push_back(episode);
  recent_.push_back(episode);
  if (recent_.size() > window_) recent_.pop_front();

  std::vector<double> reward, per_step, value;
  for (const auto& e : recent_) {
    reward.push_back(e.extrinsic_reward);
    per_step.push_back(e.reward_per_step());
    value.push_back(e.extrinsic_value_mean);
  }
  const auto r = mean_std(reward), p = mean_std(per_step), v = mean_std(value);
  MetricsRecord rec{t, updates, steps, r.mean, r.stddev, p.mean, p.stddev, v.mean, v.stddev};
  records_.push_back(rec);
  return rec;
}

std::vector<MetricsRecord> MetricsSink::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::vector<EpisodeSummary> MetricsSink::episodes() const {
  std::lock_guard lock(mutex_);
  return episodes_;
}

std::size_t MetricsSink::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(std::string_view field, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw ConfigError("csv line " + std::to_string(line) + ": bad number '" + std::string(field) + "'");
  }
  return v;
}

std::uint64_t parse_count(std::string_view field, std::size_t line) {
  std::uint64_t v = 0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw ConfigError("csv line " + std::to_string(line) + ": bad count '" + std::string(field) + "'");
  }
  return v;
}

}  // namespace

void write_csv(std::ostream& out, const std::vector<MetricsRecord>& records) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << format_double(r.time_axis) << ',' << r.updates << ',' << r.steps << ','
        << format_double(r.extrinsic_reward_mean) << ',' << format_double(r.extrinsic_reward_std)
        << ',' << format_double(r.extrinsic_reward_per_step_mean) << ','
        << format_double(r.extrinsic_reward_per_step_std) << ','
        << format_double(r.extrinsic_value_per_step_mean) << ','
        << format_double(r.extrinsic_value_per_step_std) << '\n';
  }
}

std::vector<MetricsRecord> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw ConfigError("csv: missing or unexpected header");
  }
  std::vector<MetricsRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() != 9) {
      throw ConfigError("csv line " + std::to_string(line_no) + ": expected 9 fields");
    }
    out.push_back({parse_double(f[0], line_no), parse_count(f[1], line_no),
                   parse_count(f[2], line_no), parse_double(f[3], line_no),
                   parse_double(f[4], line_no), parse_double(f[5], line_no),
                   parse_double(f[6], line_no), parse_double(f[7], line_no),
                   parse_double(f[8], line_no)});
  }
  return out;
}

void save_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  write_csv(out, records);
  if (!out) throw ConfigError("failed writing " + path.string());
}

std::vector<MetricsRecord> load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open csv file " + path.string());
  try {
    return parse_csv(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace poer::exp
