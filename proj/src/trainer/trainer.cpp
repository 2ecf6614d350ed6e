#include "poer/trainer/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "poer/common/error.hpp"
#include "poer/nn/serialize.hpp"
#include "poer/replay/refresh.hpp"

namespace poer::trainer {

namespace {

using replay::Batch;

std::vector<double> column(const Batch& b, double agent::RolloutStep::*field) {
  std::vector<double> out;
  out.reserve(b.size());
  for (const auto& s : b.steps) out.push_back(s.*field);
  return out;
}

std::vector<bool> dones(const Batch& b) {
  std::vector<bool> out;
  out.reserve(b.size());
  for (const auto& s : b.steps) out.push_back(s.done);
  return out;
}

void compute_returns(PreparedBatch& p, const agent::LossConfig& loss) {
  const auto d = dones(p.batch);
  p.returns_ext = agent::discounted_returns(column(p.batch, &agent::RolloutStep::reward_ext), d,
                                            p.batch.bootstrap_ext, loss.gamma_ext, loss.episodic_ext);
  p.returns_int = agent::discounted_returns(column(p.batch, &agent::RolloutStep::reward_int), d,
                                            p.batch.bootstrap_int, loss.gamma_int, loss.episodic_int);
}

template <class T>
T relaxed_load(const T& x) {
  return std::atomic_ref<T>(const_cast<T&>(x)).load(std::memory_order_relaxed);
}

void load_tensor(nn::Tensor& dst, const nn::Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = relaxed_load(src[i]);
}

}  // namespace

void TrainerConfig::validate() const {
  if (worker_count == 0) throw ConfigError("trainer.workers must be at least 1");
  if (batch_size == 0) throw ConfigError("trainer.batch_size must be at least 1");
  if (super_batch_size == 0) throw ConfigError("trainer.super_batch must be at least 1");
  if (epochs == 0) throw ConfigError("trainer.epochs must be at least 1");
  if (hidden_units == 0 || hidden_layers == 0) throw ConfigError("agent network must have hidden units");
  if (rnd_hidden_units == 0 || rnd_feature_length == 0) throw ConfigError("rnd network sizes must be positive");
  if (!(rnd_dropout >= 0.0 && rnd_dropout < 1.0)) throw ConfigError("rnd.dropout must lie in [0, 1)");
  if (!(rnd_obs_clip > 0.0)) throw ConfigError("rnd.obs_clip must be positive");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("optim.learning_rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("optim betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("optim.epsilon must be positive");
  loss.validate();
  replay.validate();
}

std::vector<nn::Tensor*> trainable_parameters(agent::PolicyNet& net, rnd::RndPair& rnd) {
  auto out = agent::parameters(net);
  for (nn::Tensor* t : nn::parameters(rnd.predictor)) out.push_back(t);
  return out;
}

Model Model::create(const TrainerConfig& config, std::size_t observation_length, int action_count,
                    Rng& rng) {
  agent::PolicyConfig pc{observation_length, action_count, config.hidden_units, config.hidden_layers};
  auto net = agent::PolicyNet::create(pc, rng);
  rnd::RndConfig rc{observation_length, config.rnd_hidden_units, config.rnd_hidden_layers,
                    config.rnd_feature_length, config.rnd_dropout, config.rnd_obs_clip};
  auto pair = rnd::RndPair::create(rc, rng);
  auto params = trainable_parameters(net, pair);
  nn::AdamState optimizer(config.adam, params);
  return Model{std::move(net), std::move(pair), std::move(optimizer)};
}

std::vector<const nn::Tensor*> checkpoint_tensors(const Model& model) {
  auto out = agent::parameters(model.net);
  for (const nn::Tensor* t : nn::parameters(model.rnd.predictor)) out.push_back(t);
  for (const nn::Tensor* t : nn::parameters(model.rnd.target)) out.push_back(t);
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  const auto tensors = checkpoint_tensors(model);
  nn::save_tensors(path, tensors);
}

void load_checkpoint(const std::filesystem::path& path, Model& model) {
  auto loaded = nn::load_tensors(path);
  auto dst = trainable_parameters(model.net, model.rnd);
  for (nn::Tensor* t : nn::parameters(model.rnd.target)) dst.push_back(t);
  if (loaded.size() != dst.size()) {
    throw ConfigError(path.string() + ": checkpoint holds " + std::to_string(loaded.size()) +
                      " tensors, model needs " + std::to_string(dst.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (!loaded[i].same_shape(*dst[i])) {
      throw ConfigError(path.string() + ": tensor " + std::to_string(i) + " has shape " +
                        loaded[i].shape_string() + ", expected " + dst[i]->shape_string());
    }
    *dst[i] = std::move(loaded[i]);
  }
}

WorkerState::WorkerState(std::size_t index_, envs::WrappedEnv env_, Rng rng)
    : index(index_),
      env(std::move(env_)),
      act_rng(rng.split()),
      replay_rng(rng.split()),
      train_rng(rng.split()) {
  observation = env.reset();
}

Batch rollout(WorkerState& worker, const agent::PolicyNet& net, std::size_t steps,
              const std::function<void(const exp::EpisodeSummary&)>& on_episode_end) {
  Batch batch;
  batch.episode_id = worker.current_episode_id();
  batch.steps.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const auto a = agent::act(net, worker.observation, worker.act_rng);
    auto t = worker.env.step(a.action);
    agent::RolloutStep s;
    s.observation = std::move(worker.observation);
    s.next_observation = t.observation;
    s.action = a.action;
    s.log_prob_old = a.log_prob;
    s.value_ext = a.value_ext;
    s.value_int = a.value_int;
    s.reward_ext = t.extrinsic_reward;
    s.done = t.done;
    batch.steps.push_back(std::move(s));

    worker.episode_reward += t.extrinsic_reward;
    worker.episode_value_sum += a.value_ext;
    ++worker.episode_length;
    if (t.done) {
      exp::EpisodeSummary summary{worker.episode_reward, worker.episode_length,
                                  worker.episode_value_sum / static_cast<double>(worker.episode_length)};
      worker.episode_reward = worker.episode_value_sum = 0.0;
      worker.episode_length = 0;
      ++worker.episode_counter;
      worker.observation = worker.env.reset();
      if (on_episode_end) on_episode_end(summary);
      break;
    }
    worker.observation = std::move(t.observation);
  }
  if (!batch.steps.empty()) {
    const auto& last = batch.steps.back().next_observation;
    const auto out = agent::evaluate(net, nn::Tensor::matrix(1, last.size(), last));
    batch.bootstrap_ext = out.value_ext[0];
    batch.bootstrap_int = out.value_int[0];
  }
  return batch;
}

void score_fresh_batch(Batch& batch, rnd::RndPair& rnd) {
  for (const auto& s : batch.steps) rnd.obs_normalizer.update(s.next_observation);
  batch = replay::refresh_priority(batch, rnd);
}

Batch collect_batch(WorkerState& worker, const agent::PolicyNet& net, rnd::RndPair& rnd,
                    std::size_t steps,
                    const std::function<void(const exp::EpisodeSummary&)>& on_episode_end) {
  auto batch = rollout(worker, net, steps, on_episode_end);
  score_fresh_batch(batch, rnd);
  return batch;
}

PreparedBatch prepare_fresh_batch(Batch batch, const agent::LossConfig& loss) {
  PreparedBatch p{std::move(batch), false, {}, {}};
  compute_returns(p, loss);
  return p;
}

PreparedBatch prepare_replayed_batch(const Batch& batch, const agent::PolicyNet& net,
                                     const rnd::RndPair& rnd, const agent::LossConfig& loss) {
  PreparedBatch p{replay::refresh_priority(batch, rnd), true, {}, {}};
  if (!p.batch.steps.empty()) {
    std::vector<envs::StackedObs> rows;
    rows.reserve(p.batch.size() + 1);
    for (const auto& s : p.batch.steps) rows.push_back(s.observation);
    rows.push_back(p.batch.steps.back().next_observation);
    const auto out = agent::evaluate(net, agent::stack_rows(rows));
    for (std::size_t i = 0; i < p.batch.size(); ++i) {
      p.batch.steps[i].value_ext = out.value_ext[i];
      p.batch.steps[i].value_int = out.value_int[i];
    }
    p.batch.bootstrap_ext = out.value_ext.back();
    p.batch.bootstrap_int = out.value_int.back();
  }
  compute_returns(p, loss);
  return p;
}

std::vector<double> batch_advantages(const PreparedBatch& p, const agent::LossConfig& loss) {
  const auto ae = agent::advantage(p.returns_ext, column(p.batch, &agent::RolloutStep::value_ext));
  const auto ai = agent::advantage(p.returns_int, column(p.batch, &agent::RolloutStep::value_int));
  return agent::mixed_advantage(ae, ai, loss);
}

SuperBatchGradients super_batch_gradients(const std::vector<PreparedBatch>& super_batch,
                                          const agent::PolicyNet& net, const rnd::RndPair& rnd,
                                          const agent::LossConfig& loss, Rng& dropout_rng) {
  SuperBatchGradients out;
  LossReport& report = out.report;
  std::vector<envs::StackedObs> obs, fresh_next;
  std::vector<int> actions;
  std::vector<double> logp_old, adv, ret_e, ret_i, v_e, v_i;
  for (const auto& p : super_batch) {
    (p.replayed ? report.replayed_batches : report.fresh_batches) += 1;
    const auto a = batch_advantages(p, loss);
    adv.insert(adv.end(), a.begin(), a.end());
    ret_e.insert(ret_e.end(), p.returns_ext.begin(), p.returns_ext.end());
    ret_i.insert(ret_i.end(), p.returns_int.begin(), p.returns_int.end());
    for (const auto& s : p.batch.steps) {
      obs.push_back(s.observation);
      actions.push_back(s.action);
      logp_old.push_back(s.log_prob_old);
      v_e.push_back(s.value_ext);
      v_i.push_back(s.value_int);
      if (!p.replayed) fresh_next.push_back(s.next_observation);
    }
  }
  report.rows = obs.size();
  if (obs.empty()) return out;

  nn::Tape tape;
  const auto x = tape.constant(agent::stack_rows(obs));
  const auto pv = agent::evaluate(tape, net, 0, x);
  const auto logp = tape.gather_cols(tape.log_softmax(pv.logits), actions);
  const auto ent = agent::entropy_from_logits(tape, pv.logits);
  const auto actor = agent::ppo_actor_loss(tape, logp, logp_old, adv, ent, loss);
  const auto critic_e = agent::pvo_critic_loss(tape, ret_e, pv.value_ext, v_e, loss);
  const auto critic_i = agent::pvo_critic_loss(tape, ret_i, pv.value_int, v_i, loss);
  auto total = tape.add(actor, tape.add(critic_e, critic_i));
  if (!fresh_next.empty()) {
    const auto normalized = rnd::normalized_rows(rnd.obs_normalizer, fresh_next);
    const auto rnd_loss = rnd::predictor_loss(tape, rnd, net.param_count(), normalized, dropout_rng);
    report.rnd = tape.value(rnd_loss).item();
    total = tape.add(total, rnd_loss);
  }
  report.actor = tape.value(actor).item();
  report.critic_ext = tape.value(critic_e).item();
  report.critic_int = tape.value(critic_i).item();
  report.total = tape.value(total).item();
  double ent_sum = 0.0;
  for (double e : tape.value(ent).data()) ent_sum += e;
  report.entropy = ent_sum / static_cast<double>(report.rows);
  if (!std::isfinite(report.total)) {
    std::ostringstream os;
    os << "non-finite loss: actor=" << report.actor << " critic_ext=" << report.critic_ext
       << " critic_int=" << report.critic_int << " rnd=" << report.rnd.value_or(0.0)
       << " rows=" << report.rows << " fresh=" << report.fresh_batches
       << " replayed=" << report.replayed_batches;
    throw NumericalFault(os.str());
  }
  out.grads = tape.backward(total);
  return out;
}

LossReport train_super_batch(const std::vector<PreparedBatch>& super_batch, Model& model,
                             const agent::LossConfig& loss, Rng& dropout_rng, std::size_t epochs) {
  LossReport report;
  auto params = trainable_parameters(model.net, model.rnd);
  for (std::size_t e = 0; e < epochs; ++e) {
    auto g = super_batch_gradients(super_batch, model.net, model.rnd, loss, dropout_rng);
    if (g.report.rows == 0) return g.report;
    model.optimizer.step(params, g.grads);
    report = g.report;
  }
  return report;
}

// ---------------------------------------------------------------------------

struct Trainer::Shared {
  bool hogwild = false;
  std::mutex budget_mutex;
  std::uint64_t steps_reserved = 0;
  std::atomic<std::uint64_t> steps_done{0};
  std::atomic<std::uint64_t> updates{0};
  std::atomic<std::uint64_t> episodes{0};
  std::atomic<std::uint64_t> fresh{0};
  std::atomic<std::uint64_t> replayed{0};
  std::mutex normalizer_mutex;
  std::mutex super_mutex;
  std::vector<PreparedBatch> super_batch;
  std::mutex metrics_mutex;
  std::mutex report_mutex;
  std::optional<LossReport> last_loss;
  std::mutex checkpoint_mutex;
  std::atomic<bool> stop{false};
};

namespace {

envs::WrappedEnv probe_env(const TrainerConfig& config) {
  config.validate();
  return envs::make_env(config.env);
}

Model make_model(const TrainerConfig& config, Rng& root) {
  const auto env = probe_env(config);
  Rng init = root.split();
  return Model::create(config, env.observation_length(), env.action_count(), init);
}

}  // namespace

Trainer::Trainer(TrainerConfig config)
    : config_(std::move(config)),
      root_(config_.seed),
      model_(make_model(config_, root_)),
      replay_(config_.replay, root_.next_u64()) {
  const auto env = envs::make_env(config_.env);
  workers_.reserve(config_.worker_count);
  for (std::size_t i = 0; i < config_.worker_count; ++i) {
    workers_.emplace_back(i, env, root_.split());
  }
}

bool Trainer::reserve_steps(Shared& shared, std::size_t& steps) {
  std::lock_guard lock(shared.budget_mutex);
  if (shared.stop.load() || shared.steps_reserved >= config_.total_steps) return false;
  steps = static_cast<std::size_t>(
      std::min<std::uint64_t>(config_.batch_size, config_.total_steps - shared.steps_reserved));
  shared.steps_reserved += steps;
  return true;
}

void Trainer::snapshot(agent::PolicyNet& net, rnd::RndPair& rnd, Shared& shared) {
  const auto src = agent::parameters(std::as_const(model_.net));
  const auto dst = agent::parameters(net);
  for (std::size_t i = 0; i < src.size(); ++i) load_tensor(*dst[i], *src[i]);
  const auto psrc = nn::parameters(std::as_const(model_.rnd.predictor));
  const auto pdst = nn::parameters(rnd.predictor);
  for (std::size_t i = 0; i < psrc.size(); ++i) load_tensor(*pdst[i], *psrc[i]);
  std::lock_guard lock(shared.normalizer_mutex);
  rnd.obs_normalizer = model_.rnd.obs_normalizer;
}

void Trainer::maybe_checkpoint(std::uint64_t update, Shared& shared) {
  if (config_.checkpoint_every == 0 || update % config_.checkpoint_every != 0) return;
  std::lock_guard lock(shared.checkpoint_mutex);
  std::filesystem::create_directories(config_.checkpoint_dir);
  char name[48];
  std::snprintf(name, sizeof name, "checkpoint_%08llu.poer", static_cast<unsigned long long>(update));
  if (shared.hogwild) {
    agent::PolicyNet net = model_.net;  // shapes only; values reloaded below
    rnd::RndPair rnd = model_.rnd;
    snapshot(net, rnd, shared);
    save_checkpoint(config_.checkpoint_dir / name, Model{net, rnd, model_.optimizer});
  } else {
    save_checkpoint(config_.checkpoint_dir / name, model_);
  }
}

void Trainer::train_now(Shared& shared, std::vector<PreparedBatch> super_batch, Rng& rng,
                        const UpdateObserver& observer) {
  for (std::size_t e = 0; e < config_.epochs; ++e) {
    LossReport report;
    if (shared.hogwild) {
      agent::PolicyNet net = model_.net;
      rnd::RndPair rnd = model_.rnd;
      snapshot(net, rnd, shared);
      auto g = super_batch_gradients(super_batch, net, rnd, config_.loss, rng);
      auto params = trainable_parameters(model_.net, model_.rnd);
      model_.optimizer.step_shared(params, g.grads);
      report = g.report;
    } else {
      report = train_super_batch(super_batch, model_, config_.loss, rng, 1);
    }
    const auto update = shared.updates.fetch_add(1) + 1;
    {
      std::lock_guard lock(shared.report_mutex);
      shared.last_loss = report;
    }
    if (observer) observer(update, model_, report);
    maybe_checkpoint(update, shared);
  }
}

void Trainer::push_and_maybe_train(Shared& shared, PreparedBatch prepared, WorkerState& worker,
                                   const UpdateObserver& observer) {
  std::vector<PreparedBatch> full;
  {
    std::lock_guard lock(shared.super_mutex);
    shared.super_batch.push_back(std::move(prepared));
    if (shared.super_batch.size() < config_.super_batch_size) return;
    full.swap(shared.super_batch);
  }
  train_now(shared, std::move(full), worker.train_rng, observer);
}

bool Trainer::worker_iteration(WorkerState& worker, Shared& shared, exp::MetricsSink& sink,
                               const UpdateObserver& observer) {
  std::size_t n = 0;
  if (!reserve_steps(shared, n)) return false;

  std::vector<exp::EpisodeSummary> finished;
  auto on_end = [&finished](const exp::EpisodeSummary& s) { finished.push_back(s); };

  // In Hogwild mode the worker acts on a relaxed snapshot of the shared
  // parameters; synchronously it reads them directly.
  std::optional<agent::PolicyNet> local_net;
  std::optional<rnd::RndPair> local_rnd;
  Batch batch;
  if (shared.hogwild) {
    local_net = model_.net;
    local_rnd = model_.rnd;
    snapshot(*local_net, *local_rnd, shared);
    batch = rollout(worker, *local_net, n, on_end);
    {
      std::lock_guard lock(shared.normalizer_mutex);
      for (const auto& s : batch.steps) model_.rnd.obs_normalizer.update(s.next_observation);
      local_rnd->obs_normalizer = model_.rnd.obs_normalizer;
    }
    batch = replay::refresh_priority(batch, *local_rnd);
  } else {
    batch = collect_batch(worker, model_.net, model_.rnd, n, on_end);
  }
  const bool episode_ended = !batch.steps.empty() && batch.steps.back().done;
  if (batch.size() < n) {
    std::lock_guard lock(shared.budget_mutex);
    shared.steps_reserved -= n - batch.size();
  }

  {
    std::lock_guard lock(shared.metrics_mutex);
    const auto steps = shared.steps_done.fetch_add(batch.size()) + batch.size();
    for (const auto& s : finished) {
      sink.record(s, shared.updates.load(), steps);
      shared.episodes.fetch_add(1);
    }
  }

  auto prepared = prepare_fresh_batch(std::move(batch), config_.loss);
  const auto mode = config_.replay.priority_mode;
  if (mode == replay::PriorityMode::kAdvantage) {
    prepared.batch.priority = replay::compute_priority(prepared.batch, mode,
                                                       batch_advantages(prepared, config_.loss));
  } else if (mode != replay::PriorityMode::kIntrinsic) {
    prepared.batch.priority = replay::compute_priority(prepared.batch, mode);
  }
  worker.pending.add(prepared.batch);
  if (episode_ended) {
    for (auto& c : worker.pending.flush(worker.novelty)) {
      if (c.importance_class) replay_.insert(*c.importance_class, std::move(c.batch));
    }
  }
  shared.fresh.fetch_add(1);
  push_and_maybe_train(shared, std::move(prepared), worker, observer);

  const int k = config_.replay.replay_ratio > 0.0 ? replay::ReplayScheduler(config_.replay.replay_ratio)
                                                        .replay_count(worker.replay_rng)
                                                  : 0;
  for (int i = 0; i < k; ++i) {
    auto sampled = replay_.sample(worker.replay_rng);
    if (!sampled) break;
    PreparedBatch p;
    if (shared.hogwild) {
      snapshot(*local_net, *local_rnd, shared);
      p = prepare_replayed_batch(*sampled->batch, *local_net, *local_rnd, config_.loss);
    } else {
      p = prepare_replayed_batch(*sampled->batch, model_.net, model_.rnd, config_.loss);
    }
    if (mode == replay::PriorityMode::kAdvantage) {
      p.batch.priority = replay::compute_priority(p.batch, mode, batch_advantages(p, config_.loss));
    } else if (mode != replay::PriorityMode::kIntrinsic) {
      p.batch.priority = replay::compute_priority(p.batch, mode);
    }
    replay_.refresh(*sampled, p.batch);
    shared.replayed.fetch_add(1);
    push_and_maybe_train(shared, std::move(p), worker, observer);
  }
  return true;
}

RunSummary Trainer::run(exp::MetricsSink& sink, const UpdateObserver& observer) {
  const auto start = std::chrono::steady_clock::now();
  Shared shared;
  shared.hogwild = !config_.synchronous && workers_.size() > 1;

  std::exception_ptr failure;
  if (!shared.hogwild) {
    try {
      bool progressed = true;
      while (progressed) {
        progressed = false;
        for (auto& w : workers_) progressed = worker_iteration(w, shared, sink, observer) || progressed;
      }
    } catch (...) {
      failure = std::current_exception();
    }
  } else {
    std::mutex failure_mutex;
    std::vector<std::thread> threads;
    for (auto& w : workers_) {
      threads.emplace_back([&, wp = &w] {
        try {
          while (!shared.stop.load() && worker_iteration(*wp, shared, sink, observer)) {
          }
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          shared.stop.store(true);
        }
      });
    }
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  if (!shared.super_batch.empty()) {
    auto rest = std::move(shared.super_batch);
    shared.super_batch.clear();
    shared.hogwild = false;
    train_now(shared, std::move(rest), workers_.front().train_rng, observer);
  }

  RunSummary summary;
  summary.steps = shared.steps_done.load();
  summary.updates = shared.updates.load();
  summary.episodes = shared.episodes.load();
  summary.fresh_batches = shared.fresh.load();
  summary.replayed_batches = shared.replayed.load();
  summary.policy_checksum = agent::checksum(model_.net);
  summary.predictor_checksum = nn::checksum(model_.rnd.predictor);
  summary.target_checksum = nn::checksum(model_.rnd.target);
  summary.last_loss = shared.last_loss;
  summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return summary;
}

}  // namespace poer::trainer
