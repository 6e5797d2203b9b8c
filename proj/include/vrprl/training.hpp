#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vrprl/env.hpp"
#include "vrprl/instances.hpp"
#include "vrprl/nn/checkpoint.hpp"
#include "vrprl/nn/optim.hpp"
#include "vrprl/policy.hpp"
#include "vrprl/svrp.hpp"

namespace vrprl {

struct TrainConfig {
  GeneratorConfig problem;
  ActorConfig actor;
  CriticConfig critic;
  int batch = 128;
  double lr_actor = 1e-4;
  double lr_critic = 1e-4;
  double clip_norm = 2.0;
  // Total iterations; when 0 it is epochs * instances_per_epoch / batch.
  int iterations = 0;
  int epochs = 1;
  int instances_per_epoch = 128;
  int eval_every = 0;
  int eval_instances = 100;
  int checkpoint_every = 0;
  std::string checkpoint_dir;
  std::string metrics_path;
  std::uint64_t seed = 0;
  int threads = 1;
  double time_budget_s = 0.0;  // 0 = unlimited
  // When non-empty every iteration trains on this fixed set instead of
  // freshly generated instances (batch becomes its size).
  std::vector<ProblemInstance> fixed_instances;

  void validate() const;
  int total_iterations() const;
};

struct TrainMetrics {
  int iteration = 0;
  double mean_reward = 0.0;
  double mean_advantage = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double grad_norm_pre_clip = 0.0;  // actor
  double critic_grad_norm_pre_clip = 0.0;
  double wall_s = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const TrainMetrics& m);

// Gradients of one REINFORCE batch, before clipping.
struct BatchGrads {
  nn::Grads actor;
  nn::Grads critic;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<double> log_probs;
};

// Runs one rollout per instance (sampling, dropout on) and returns the
// averaged actor gradient of (R - V) log P and critic gradient of (R - V)^2.
// `advantage_override`, when set, replaces R - V (used by tests).
BatchGrads reinforce_gradients(const std::vector<ProblemInstance>& batch, const nn::ParamStore& actor,
                               const ActorConfig& acfg, const nn::ParamStore& critic,
                               const std::vector<std::uint64_t>& rollout_seeds, bool split_mode = false,
                               int threads = 1,
                               const std::function<double(std::size_t, double, double)>& advantage_override = {});

class ReinforceTrainer {
 public:
  explicit ReinforceTrainer(TrainConfig cfg);

  // Runs up to `iterations` more iterations (all remaining when negative).
  // Returns the metrics of the iterations run by this call.
  std::vector<TrainMetrics> run(int iterations = -1);

  void save(const std::filesystem::path& dir) const;
  // Restores parameters, optimizer state and the iteration counter.
  void resume(const std::filesystem::path& dir);

  const nn::ParamStore& actor() const { return actor_; }
  const nn::ParamStore& critic() const { return critic_; }
  int iteration() const { return iteration_; }
  const TrainConfig& config() const { return cfg_; }

  // Instances of iteration `it`; deterministic in (seed, it).
  std::vector<ProblemInstance> batch_instances(int it) const;

 private:
  TrainMetrics step();

  TrainConfig cfg_;
  nn::ParamStore actor_, critic_;
  nn::OptimizerState opt_actor_, opt_critic_;
  int iteration_ = 0;
  double wall_offset_ = 0.0;
};

// Convenience wrapper: train to completion, writing metrics and checkpoints
// as configured.
struct TrainOutcome {
  nn::ParamStore actor;
  nn::ParamStore critic;
  std::vector<TrainMetrics> metrics;
};
TrainOutcome reinforce_train(const TrainConfig& cfg);

nn::Checkpoint make_policy_checkpoint(const nn::ParamStore& actor, const ActorConfig& acfg,
                                      const nn::ParamStore& critic, const CriticConfig& ccfg);
// Loads actor (and critic when present) weights; the architecture is read
// from the manifest. Throws LoadError when `expected` disagrees.
struct LoadedPolicy {
  ActorConfig actor_cfg;
  CriticConfig critic_cfg;
  nn::ParamStore actor;
  nn::ParamStore critic;
  nn::Checkpoint raw;
};
LoadedPolicy load_policy(const std::filesystem::path& dir, const ActorConfig* expected = nullptr);

// ---- evaluation ----------------------------------------------------------

struct EvalSummary {
  std::vector<Solution> solutions;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  double mean_wall_s = 0.0;
};

EvalSummary evaluate(const nn::ParamStore& actor, const ActorConfig& acfg,
                     const std::vector<ProblemInstance>& instances, const DecodeOptions& opt,
                     std::uint64_t seed = 0);
// instance_id, solver, length, wall_s, feasible
void write_eval_csv(const std::filesystem::path& path, const std::vector<ProblemInstance>& instances,
                    const std::vector<Solution>& solutions);

// ---- asynchronous advantage actor-critic ---------------------------------

struct A3cConfig {
  SvrpConfig svrp;
  ActorConfig actor = ActorConfig::for_svrp();
  CriticConfig critic;
  int workers = 1;
  int sync_period = 1;  // decision epochs accumulated per central update
  double lr = 1e-5;
  double discount = 1.0;
  double clip_norm = 2.0;
  int max_updates = 0;         // 0 = unlimited
  double time_budget_s = 0.0;  // 0 = unlimited
  bool deterministic = true;   // single thread, workers interleaved round-robin
  std::uint64_t seed = 0;
  std::string metrics_path;
  std::string checkpoint_dir;

  void validate() const;
};

struct A3cOutcome {
  nn::ParamStore actor;
  nn::ParamStore critic;
  std::vector<TrainMetrics> metrics;
  int updates = 0;
  int episodes = 0;
};

A3cOutcome a3c_train(const A3cConfig& cfg);

// Optional initial weights (e.g. to continue a run).
A3cOutcome a3c_train(const A3cConfig& cfg, nn::ParamStore actor, nn::ParamStore critic);

}  // namespace vrprl
