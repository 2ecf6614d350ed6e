#include "poer/envs/deep_chain.hpp"

#include <string>

#include "poer/common/error.hpp"

namespace poer::envs {

DeepChain::DeepChain(int length, int action_count) : length_(length), action_count_(action_count) {
  if (length < 1) throw ConfigError("DeepChain length must be at least 1");
  if (action_count < 2) throw ConfigError("DeepChain needs at least 2 actions");
}

std::vector<double> DeepChain::reset() {
  position_ = 0;
  return observe();
}

Environment::Step DeepChain::step(int action) {
  if (action < 0 || action >= action_count_) {
    throw UsageError("DeepChain: invalid action " + std::to_string(action));
  }
  Step out;
  if (action == kRight) {
    ++position_;
  } else {
    position_ = 0;
  }
  if (position_ == length_) {
    out.reward = 1.0;
    out.done = true;
    out.info = "goal";
  }
  out.observation = observe();
  return out;
}

std::unique_ptr<Environment> DeepChain::clone() const { return std::make_unique<DeepChain>(*this); }

std::vector<double> DeepChain::observe() const {
  std::vector<double> obs(static_cast<std::size_t>(length_) + 1, 0.0);
  obs[static_cast<std::size_t>(position_)] = 1.0;
  return obs;
}

}  // namespace poer::envs
