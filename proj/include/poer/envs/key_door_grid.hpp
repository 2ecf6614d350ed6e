#pragma once

#include "poer/envs/env.hpp"

namespace poer::envs {

struct GridCell {
  int x = 0;
  int y = 0;
  friend bool operator==(const GridCell&, const GridCell&) = default;
};

struct KeyDoorLayout {
  int width = 5;
  int height = 5;
  GridCell start{0, 0};
  GridCell key{0, 4};
  GridCell door{4, 0};
  bool key_bonus = false;  // +0.1 on key pickup

  void validate() const;
};

// Grid world: pick up the key, then walk into the door. Walls bound the grid
// (moving into one is a no-op). Observation: one-hot agent cell followed by a
// key-held flag.
class KeyDoorGrid : public Environment {
 public:
  enum Action { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
  static constexpr double kKeyBonus = 0.1;
  static constexpr double kDoorReward = 1.0;

  explicit KeyDoorGrid(KeyDoorLayout layout = {});

  std::string name() const override { return "key_door_grid"; }
  std::size_t observation_length() const override;
  int action_count() const override { return 4; }
  std::vector<double> reset() override;
  Step step(int action) override;
  std::unique_ptr<Environment> clone() const override;

  GridCell agent() const { return agent_; }
  bool has_key() const { return has_key_; }
  const KeyDoorLayout& layout() const { return layout_; }

 private:
  std::vector<double> observe() const;

  KeyDoorLayout layout_;
  GridCell agent_;
  bool has_key_ = false;
};

struct EnvOptions {
  std::string name = "deep_chain";
  int chain_length = 40;
  int chain_actions = 2;
  KeyDoorLayout grid;
  WrapperOptions wrapper;
};

// Builds a wrapped environment by name ("deep_chain" or "key_door_grid").
WrappedEnv make_env(const EnvOptions& options);

}  // namespace poer::envs
