#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "poer/trainer/trainer.hpp"

namespace poer::exp {

// One experiment arm: the trainer configuration plus bookkeeping. Defaults
// are the paper's default arm (mu = 0.5, P_d = 1, B = 128, S = 64).
struct RunConfig {
  std::string name = "default";
  std::filesystem::path out_dir = "runs";
  trainer::TrainerConfig trainer;

  void validate() const { trainer.validate(); }
  bool operator==(const RunConfig& other) const;
};

// Sectioned "key = value" text, '#' comments. Every key is optional; unknown
// sections or keys are rejected with the offending line number.
RunConfig parse_config(std::istream& in, const RunConfig& base = {});
RunConfig load_config(const std::filesystem::path& path, const RunConfig& base = {});

// Writes every key, so the file reloads to an identical RunConfig.
void write_config(std::ostream& out, const RunConfig& config);
void save_config(const std::filesystem::path& path, const RunConfig& config);
std::string to_text(const RunConfig& config);

// Sets one value by dotted key, e.g. "replay.replay_ratio".
void set_value(RunConfig& config, std::string_view dotted_key, std::string_view value);
std::string get_value(const RunConfig& config, std::string_view dotted_key);
std::vector<std::string> config_keys();

}  // namespace poer::exp
