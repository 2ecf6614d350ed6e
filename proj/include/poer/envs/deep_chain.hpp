#pragma once

#include "poer/envs/env.hpp"

namespace poer::envs {

// Corridor of cells 0..n. Action 1 moves right; every other action sends the
// agent back to cell 0 without ending the episode. Entering cell n (after n
// consecutive rights) pays +1 and terminates. Observation: one-hot over the
// n+1 cells.
class DeepChain : public Environment {
 public:
  static constexpr int kRight = 1;
  static constexpr int kLeft = 0;

  explicit DeepChain(int length, int action_count = 2);

  std::string name() const override { return "deep_chain"; }
  std::size_t observation_length() const override { return static_cast<std::size_t>(length_) + 1; }
  int action_count() const override { return action_count_; }
  std::vector<double> reset() override;
  Step step(int action) override;
  std::unique_ptr<Environment> clone() const override;

  int position() const { return position_; }
  int length() const { return length_; }

 private:
  std::vector<double> observe() const;

  int length_;
  int action_count_;
  int position_ = 0;
};

}  // namespace poer::envs
