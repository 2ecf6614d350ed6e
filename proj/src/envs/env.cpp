#include "poer/envs/env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "poer/common/error.hpp"

namespace poer::envs {

void EnvSpec::validate() const {
  if (max_episode_steps <= 0) throw ConfigError("max_episode_steps must be positive");
  if (!(reward_clip_lo <= reward_clip_hi)) throw ConfigError("reward clip range is not ordered");
  if (action_count <= 0) throw ConfigError("environment needs at least one action");
}

double clip_reward(double reward, double lo, double hi) { return std::clamp(reward, lo, hi); }

WrappedEnv::WrappedEnv(std::unique_ptr<Environment> env, WrapperOptions options)
    : env_(std::move(env)), options_(options) {
  if (!env_) throw ConfigError("WrappedEnv needs an environment");
  if (options_.stack_frames < 1) throw ConfigError("stack_frames must be at least 1");
  spec_.name = env_->name();
  spec_.observation_length = env_->observation_length() * static_cast<std::size_t>(options_.stack_frames);
  spec_.action_count = env_->action_count();
  spec_.max_episode_steps = options_.max_episode_steps;
  spec_.reward_clip_lo = options_.reward_clip_lo;
  spec_.reward_clip_hi = options_.reward_clip_hi;
  spec_.validate();
}

WrappedEnv::WrappedEnv(const WrappedEnv& other)
    : env_(other.env_->clone()),
      options_(other.options_),
      spec_(other.spec_),
      frames_(other.frames_),
      steps_(other.steps_),
      done_(other.done_),
      started_(other.started_) {}

WrappedEnv& WrappedEnv::operator=(const WrappedEnv& other) {
  if (this != &other) *this = WrappedEnv(other);
  return *this;
}

StackedObs WrappedEnv::reset() {
  const auto first = env_->reset();
  frames_.assign(static_cast<std::size_t>(options_.stack_frames), first);
  steps_ = 0;
  done_ = false;
  started_ = true;
  return stacked();
}

Transition WrappedEnv::step(int action) {
  if (!started_) throw UsageError("step() before reset()");
  if (done_) throw UsageError("step() after the episode terminated; call reset()");
  if (action < 0 || action >= spec_.action_count) {
    throw UsageError("action " + std::to_string(action) + " outside [0, " +
                     std::to_string(spec_.action_count) + ")");
  }
  auto raw = env_->step(action);
  if (!std::isfinite(raw.reward)) throw NumericalFault("environment emitted a non-finite reward");
  ++steps_;
  frames_.pop_front();
  frames_.push_back(std::move(raw.observation));

  Transition t;
  t.observation = stacked();
  t.action = action;
  t.extrinsic_reward = clip_reward(raw.reward, spec_.reward_clip_lo, spec_.reward_clip_hi);
  t.done = raw.done;
  t.info = std::move(raw.info);
  if (!t.done && steps_ >= spec_.max_episode_steps) {
    t.done = true;
    t.info = "step_limit";
  }
  done_ = t.done;
  return t;
}

StackedObs WrappedEnv::stacked() const {
  StackedObs out;
  out.reserve(spec_.observation_length);
  for (const auto& f : frames_) out.insert(out.end(), f.begin(), f.end());
  return out;
}

}  // namespace poer::envs
