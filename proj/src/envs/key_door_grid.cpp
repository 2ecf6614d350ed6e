#include "poer/envs/key_door_grid.hpp"

#include <algorithm>
#include <string>

#include "poer/common/error.hpp"
#include "poer/envs/deep_chain.hpp"

namespace poer::envs {

namespace {

bool inside(const KeyDoorLayout& l, GridCell c) {
  return c.x >= 0 && c.y >= 0 && c.x < l.width && c.y < l.height;
}

}  // namespace

void KeyDoorLayout::validate() const {
  if (width < 2 || height < 1) throw ConfigError("KeyDoorGrid must be at least 2x1");
  if (!inside(*this, start) || !inside(*this, key) || !inside(*this, door)) {
    throw ConfigError("KeyDoorGrid start/key/door must lie inside the grid");
  }
  if (key == door || start == door || start == key) {
    throw ConfigError("KeyDoorGrid start, key and door must be distinct cells");
  }
}

KeyDoorGrid::KeyDoorGrid(KeyDoorLayout layout) : layout_(layout), agent_(layout.start) {
  layout_.validate();
}

std::size_t KeyDoorGrid::observation_length() const {
  return static_cast<std::size_t>(layout_.width * layout_.height) + 1;
}

std::vector<double> KeyDoorGrid::reset() {
  agent_ = layout_.start;
  has_key_ = false;
  return observe();
}

Environment::Step KeyDoorGrid::step(int action) {
  GridCell next = agent_;
  switch (action) {
    case kUp: --next.y; break;
    case kDown: ++next.y; break;
    case kLeft: --next.x; break;
    case kRight: ++next.x; break;
    default: throw UsageError("KeyDoorGrid: invalid action " + std::to_string(action));
  }
  if (inside(layout_, next)) agent_ = next;

  Step out;
  if (!has_key_ && agent_ == layout_.key) {
    has_key_ = true;
    out.info = "key";
    if (layout_.key_bonus) out.reward = kKeyBonus;
  } else if (agent_ == layout_.door && has_key_) {
    out.reward = kDoorReward;
    out.done = true;
    out.info = "door";
  }
  out.observation = observe();
  return out;
}

std::unique_ptr<Environment> KeyDoorGrid::clone() const {
  return std::make_unique<KeyDoorGrid>(*this);
}

std::vector<double> KeyDoorGrid::observe() const {
  std::vector<double> obs(observation_length(), 0.0);
  obs[static_cast<std::size_t>(agent_.y * layout_.width + agent_.x)] = 1.0;
  obs.back() = has_key_ ? 1.0 : 0.0;
  return obs;
}

WrappedEnv make_env(const EnvOptions& options) {
  if (options.name == "deep_chain") {
    return WrappedEnv(std::make_unique<DeepChain>(options.chain_length, options.chain_actions),
                      options.wrapper);
  }
  if (options.name == "key_door_grid") {
    return WrappedEnv(std::make_unique<KeyDoorGrid>(options.grid), options.wrapper);
  }
  throw ConfigError("unknown environment '" + options.name + "'");
}

}  // namespace poer::envs
