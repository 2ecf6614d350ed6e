#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "poer/agent/losses.hpp"
#include "poer/agent/policy.hpp"
#include "poer/common/rng.hpp"
#include "poer/envs/env.hpp"
#include "poer/envs/key_door_grid.hpp"
#include "poer/exp/metrics.hpp"
#include "poer/nn/adam.hpp"
#include "poer/replay/batch.hpp"
#include "poer/replay/replay.hpp"
#include "poer/rnd/rnd.hpp"

namespace poer::trainer {

struct TrainerConfig {
  std::size_t worker_count = 8;
  std::size_t batch_size = 64;        // B_s, steps per batch
  std::size_t super_batch_size = 64;  // S, batches per update
  std::size_t epochs = 1;             // gradient passes per super-batch
  std::uint64_t total_steps = 1'000'000;
  bool synchronous = false;
  std::uint64_t seed = 0;
  std::uint64_t checkpoint_every = 0;  // updates; 0 disables
  std::filesystem::path checkpoint_dir;

  std::size_t hidden_units = 64;
  std::size_t hidden_layers = 2;
  std::size_t rnd_hidden_units = 64;
  std::size_t rnd_hidden_layers = 2;
  std::size_t rnd_feature_length = 32;
  double rnd_dropout = 0.5;
  double rnd_obs_clip = 5.0;

  agent::LossConfig loss;
  nn::AdamConfig adam;
  replay::ReplayConfig replay;
  envs::EnvOptions env;
  exp::TimeAxis time_axis = exp::TimeAxis::kUpdates;

  void validate() const;
};

// Everything that is trained: the actor-critic, the RND pair and one Adam
// state over both. ParamIds: policy tensors first, then the predictor.
struct Model {
  agent::PolicyNet net;
  rnd::RndPair rnd;
  nn::AdamState optimizer;

  static Model create(const TrainerConfig& config, std::size_t observation_length,
                      int action_count, Rng& rng);
  std::size_t predictor_first_id() const { return net.param_count(); }
};

std::vector<nn::Tensor*> trainable_parameters(agent::PolicyNet& net, rnd::RndPair& rnd);
// Policy, predictor and target tensors, in checkpoint order.
std::vector<const nn::Tensor*> checkpoint_tensors(const Model& model);
void save_checkpoint(const std::filesystem::path& path, const Model& model);
void load_checkpoint(const std::filesystem::path& path, Model& model);

// Per-worker private state. Workers never share environments, episode
// accumulators or random streams.
struct WorkerState {
  WorkerState(std::size_t index, envs::WrappedEnv env, Rng rng);

  std::size_t index;
  envs::WrappedEnv env;
  envs::StackedObs observation;
  std::uint64_t episode_counter = 0;
  replay::PendingEpisode pending;
  replay::NoveltyThreshold novelty;
  Rng act_rng;
  Rng replay_rng;
  Rng train_rng;

  // Running totals for the episode in progress.
  double episode_reward = 0.0;
  double episode_value_sum = 0.0;
  std::uint64_t episode_length = 0;

  std::uint64_t current_episode_id() const { return (std::uint64_t{index} << 40) | episode_counter; }
};

// Acts for up to `steps` steps (fewer if the episode ends) without scoring
// novelty: reward_int and priority stay zero. Finished episodes are reported
// through `on_episode_end`.
replay::Batch rollout(WorkerState& worker, const agent::PolicyNet& net, std::size_t steps,
                      const std::function<void(const exp::EpisodeSummary&)>& on_episode_end = {});

// Updates the observation normalizer with the batch's next observations, then
// fills per-step intrinsic rewards and sets priority to their sum.
void score_fresh_batch(replay::Batch& batch, rnd::RndPair& rnd);

// rollout + score_fresh_batch.
replay::Batch collect_batch(WorkerState& worker, const agent::PolicyNet& net, rnd::RndPair& rnd,
                            std::size_t steps,
                            const std::function<void(const exp::EpisodeSummary&)>& on_episode_end = {});

// A batch ready for the loss: returns computed, flag for the RND exclusion.
struct PreparedBatch {
  replay::Batch batch;
  bool replayed = false;
  std::vector<double> returns_ext;
  std::vector<double> returns_int;
};

PreparedBatch prepare_fresh_batch(replay::Batch batch, const agent::LossConfig& loss);

// Replay precautions: intrinsic rewards rescored with the current RND,
// both returns recomputed, stored values and bootstraps replaced by the
// current critic's estimates. Actions, observations, extrinsic rewards and
// log_prob_old are kept as collected.
PreparedBatch prepare_replayed_batch(const replay::Batch& batch, const agent::PolicyNet& net,
                                     const rnd::RndPair& rnd, const agent::LossConfig& loss);

// Mixed advantage per step of a prepared batch, against its stored values.
std::vector<double> batch_advantages(const PreparedBatch& prepared, const agent::LossConfig& loss);

struct LossReport {
  double actor = 0.0;
  double critic_ext = 0.0;
  double critic_int = 0.0;
  double entropy = 0.0;  // mean policy entropy
  std::optional<double> rnd;
  double total = 0.0;
  std::size_t fresh_batches = 0;
  std::size_t replayed_batches = 0;
  std::size_t rows = 0;
};

// Gradients of the joint loss over a super-batch, evaluated at (net, rnd).
// The predictor's gradients are present only when some batch is fresh, so a
// super-batch of replayed batches cannot move the predictor.
struct SuperBatchGradients {
  nn::Gradients grads;
  LossReport report;
};
SuperBatchGradients super_batch_gradients(const std::vector<PreparedBatch>& super_batch,
                                          const agent::PolicyNet& net, const rnd::RndPair& rnd,
                                          const agent::LossConfig& loss, Rng& dropout_rng);

// One joint update per epoch on `model` (plain, single-threaded).
LossReport train_super_batch(const std::vector<PreparedBatch>& super_batch, Model& model,
                             const agent::LossConfig& loss, Rng& dropout_rng,
                             std::size_t epochs = 1);

struct RunSummary {
  std::uint64_t steps = 0;
  std::uint64_t updates = 0;
  std::uint64_t episodes = 0;
  std::uint64_t fresh_batches = 0;
  std::uint64_t replayed_batches = 0;
  std::uint64_t policy_checksum = 0;
  std::uint64_t predictor_checksum = 0;
  std::uint64_t target_checksum = 0;
  double seconds = 0.0;
  std::optional<LossReport> last_loss;
};

// Observer hook for tests: called after every update with the model state.
using UpdateObserver = std::function<void(std::uint64_t update, const Model& model,
                                          const LossReport& report)>;

class Trainer {
 public:
  explicit Trainer(TrainerConfig config);

  // Runs until the step budget is consumed. In synchronous mode workers take
  // turns in index order on the calling thread and results are a pure
  // function of the seed; otherwise each worker is a thread and updates
  // are applied Hogwild-style. A worker failure stops every worker and is
  // rethrown; metrics recorded so far stay in the sink.
  RunSummary run(exp::MetricsSink& sink, const UpdateObserver& observer = {});

  const TrainerConfig& config() const { return config_; }
  const Model& model() const { return model_; }
  const replay::ExperienceReplay& replay() const { return replay_; }

 private:
  struct Shared;
  bool worker_iteration(WorkerState& worker, Shared& shared, exp::MetricsSink& sink,
                        const UpdateObserver& observer);
  bool reserve_steps(Shared& shared, std::size_t& steps);
  void push_and_maybe_train(Shared& shared, PreparedBatch prepared, WorkerState& worker,
                            const UpdateObserver& observer);
  void train_now(Shared& shared, std::vector<PreparedBatch> super_batch, Rng& rng,
                 const UpdateObserver& observer);
  void snapshot(agent::PolicyNet& net, rnd::RndPair& rnd, Shared& shared);
  void maybe_checkpoint(std::uint64_t update, Shared& shared);

  TrainerConfig config_;
  Rng root_;
  Model model_;
  replay::ExperienceReplay replay_;
  std::vector<WorkerState> workers_;
};

}  // namespace poer::trainer
