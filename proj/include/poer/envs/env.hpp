#pragma once

#include <cstddef>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace poer::envs {

// Observation after frame stacking: the last K raw observations, oldest first.
using StackedObs = std::vector<double>;

struct EnvSpec {
  std::string name;
  std::size_t observation_length = 0;
  int action_count = 0;
  int max_episode_steps = 3000;
  double reward_clip_lo = -1.0;
  double reward_clip_hi = 1.0;

  void validate() const;
};

struct Transition {
  StackedObs observation;  // observation after the step
  int action = 0;
  double extrinsic_reward = 0.0;
  bool done = false;
  std::optional<std::string> info;
};

// Raw environment dynamics, before stacking, clipping and the episode cap.
class Environment {
 public:
  struct Step {
    std::vector<double> observation;
    double reward = 0.0;
    bool done = false;
    std::optional<std::string> info;
  };

  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual std::size_t observation_length() const = 0;
  virtual int action_count() const = 0;
  virtual std::vector<double> reset() = 0;
  virtual Step step(int action) = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
};

double clip_reward(double reward, double lo, double hi);

struct WrapperOptions {
  int stack_frames = 4;
  int max_episode_steps = 3000;
  double reward_clip_lo = -1.0;
  double reward_clip_hi = 1.0;
};

// Applies frame stacking, reward clipping and the episode step cap around a
// raw environment, and rejects steps once an episode has terminated.
class WrappedEnv {
 public:
  WrappedEnv(std::unique_ptr<Environment> env, WrapperOptions options = {});
  WrappedEnv(const WrappedEnv& other);
  WrappedEnv& operator=(const WrappedEnv& other);
  WrappedEnv(WrappedEnv&&) noexcept = default;
  WrappedEnv& operator=(WrappedEnv&&) noexcept = default;

  const EnvSpec& spec() const { return spec_; }
  std::size_t observation_length() const { return spec_.observation_length; }
  int action_count() const { return spec_.action_count; }

  StackedObs reset();
  Transition step(int action);

  bool done() const { return done_; }
  int episode_steps() const { return steps_; }
  const Environment& raw() const { return *env_; }

 private:
  StackedObs stacked() const;

  std::unique_ptr<Environment> env_;
  WrapperOptions options_;
  EnvSpec spec_;
  std::deque<std::vector<double>> frames_;
  int steps_ = 0;
  bool done_ = true;
  bool started_ = false;
};

}  // namespace poer::envs
