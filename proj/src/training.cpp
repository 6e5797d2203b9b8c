#include "vrprl/training.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <thread>

#include "vrprl/errors.hpp"

namespace vrprl {

using nn::Grads;
using nn::ParamStore;
using nn::Tape;
using nn::Tensor;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double meta_double(const nn::Checkpoint& c, const std::string& key) {
  auto it = c.meta.find(key);
  if (it == c.meta.end()) throw LoadError("checkpoint lacks '" + key + "'");
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw LoadError("checkpoint entry '" + key + "' is not a number");
  }
}

ParamStore to_store(const std::map<std::string, Tensor>& m) {
  ParamStore s;
  for (const auto& [k, v] : m) s.add(k, v);
  return s;
}

std::map<std::string, Tensor> from_group(const nn::Checkpoint& c, const std::string& group) {
  auto it = c.groups.find(group);
  if (it == c.groups.end()) return {};
  return it->second.all();
}

void put_optimizer(nn::Checkpoint& c, const std::string& prefix, const nn::OptimizerState& o) {
  c.meta[prefix + ".kind"] = nn::to_string(o.kind);
  c.meta[prefix + ".lr"] = num(o.lr);
  c.meta[prefix + ".beta1"] = num(o.beta1);
  c.meta[prefix + ".beta2"] = num(o.beta2);
  c.meta[prefix + ".decay"] = num(o.decay);
  c.meta[prefix + ".eps"] = num(o.eps);
  c.meta[prefix + ".step"] = std::to_string(o.step);
  if (!o.m.empty()) c.groups[prefix + ".m"] = to_store(o.m);
  if (!o.v.empty()) c.groups[prefix + ".v"] = to_store(o.v);
}

nn::OptimizerState get_optimizer(const nn::Checkpoint& c, const std::string& prefix) {
  nn::OptimizerState o;
  o.kind = nn::optimizer_kind_from_string(c.meta.at(prefix + ".kind"));
  o.lr = meta_double(c, prefix + ".lr");
  o.beta1 = meta_double(c, prefix + ".beta1");
  o.beta2 = meta_double(c, prefix + ".beta2");
  o.decay = meta_double(c, prefix + ".decay");
  o.eps = meta_double(c, prefix + ".eps");
  o.step = std::stoull(c.meta.at(prefix + ".step"));
  o.m = from_group(c, prefix + ".m");
  o.v = from_group(c, prefix + ".v");
  return o;
}

void write_metrics_row(std::ofstream& out, const TrainMetrics& m) {
  out << metrics_csv_row(m) << '\n';
  out.flush();
}

}  // namespace

void TrainConfig::validate() const {
  problem.validate();
  actor.validate();
  critic.validate();
  if (fixed_instances.empty() && batch < 1) throw ConfigError("batch must be at least 1");
  if (lr_actor <= 0.0 || lr_critic <= 0.0) throw ConfigError("learning rates must be positive");
  if (clip_norm <= 0.0) throw ConfigError("clip_norm must be positive");
  if (iterations < 0 || epochs < 1 || instances_per_epoch < 1) throw ConfigError("training length must be positive");
  if (eval_every < 0 || checkpoint_every < 0 || eval_instances < 1) throw ConfigError("schedules must be non-negative");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (actor.dynamic_features != (problem.kind == ProblemKind::tsp ? 0 : 2))
    throw ConfigError("actor dynamic_features does not match the problem kind");
}

int TrainConfig::total_iterations() const {
  if (iterations > 0) return iterations;
  const int b = fixed_instances.empty() ? batch : static_cast<int>(fixed_instances.size());
  return std::max(1, epochs * instances_per_epoch / b);
}

std::string metrics_csv_header() { return "iteration,mean_reward,actor_loss,critic_loss,grad_norm_pre_clip,wall_s"; }

std::string metrics_csv_row(const TrainMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%.10g,%.3f", m.iteration, m.mean_reward, m.actor_loss,
                m.critic_loss, m.grad_norm_pre_clip, m.wall_s);
  return buf;
}

BatchGrads reinforce_gradients(const std::vector<ProblemInstance>& batch, const ParamStore& actor,
                               const ActorConfig& acfg, const ParamStore& critic,
                               const std::vector<std::uint64_t>& rollout_seeds, bool split_mode, int threads,
                               const std::function<double(std::size_t, double, double)>& advantage_override) {
  if (batch.empty()) throw ConfigError("empty training batch");
  if (rollout_seeds.size() != batch.size()) throw ConfigError("one rollout seed per instance is required");
  const std::size_t n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  struct PerInstance {
    Grads actor, critic;
    double reward = 0.0, value = 0.0, log_prob = 0.0;
  };
  std::vector<PerInstance> per(n);

  auto work = [&](std::size_t i, Grads* actor_acc, Grads* critic_acc) {
    const ProblemInstance& inst = batch[i];
    const FirstStep fs = actor_first_step(inst, actor, acfg);
    Tape critic_tape(true);
    nn::Var v = critic_head(critic_tape, critic, fs.probs, fs.embedded);

    Rng rng(rollout_seeds[i]);
    Tape actor_tape(true);
    DecodeOptions opt;
    opt.mode = DecodeMode::sample;
    opt.inference = false;
    opt.split_mode = split_mode;
    RolloutResult r = rollout(inst, actor, acfg, opt, rng, &actor_tape);
    const double reward = r.complete ? r.solution.total_length : cap_penalty_length(inst.num_customers());
    const double value = v.item();
    const double adv = advantage_override ? advantage_override(i, reward, value) : reward - value;

    PerInstance& p = per[i];
    p.reward = reward;
    p.value = value;
    p.log_prob = r.log_prob.item();
    actor_tape.backward(r.log_prob, adv * inv_n);
    critic_tape.backward(v, -2.0 * (reward - value) * inv_n);
    actor_tape.add_param_grads(actor_acc ? *actor_acc : p.actor);
    critic_tape.add_param_grads(critic_acc ? *critic_acc : p.critic);
  };

  BatchGrads out;
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i, &out.actor, &out.critic);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = static_cast<std::size_t>(t); i < n; i += static_cast<std::size_t>(threads))
            work(i, nullptr, nullptr);
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    // Reduce in instance order so the sum matches the serial path bit for bit.
    for (auto& p : per) {
      nn::accumulate(out.actor, p.actor);
      nn::accumulate(out.critic, p.critic);
    }
  }
  for (const auto& p : per) {
    out.rewards.push_back(p.reward);
    out.values.push_back(p.value);
    out.log_probs.push_back(p.log_prob);
  }
  return out;
}

// ---------------------------------------------------------------------------

ReinforceTrainer::ReinforceTrainer(TrainConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng actor_rng = Rng::stream(cfg_.seed, 0xAC7082);
  Rng critic_rng = Rng::stream(cfg_.seed, 0xC2171C);
  actor_ = init_actor(cfg_.actor, actor_rng);
  critic_ = init_critic(cfg_.actor, cfg_.critic, critic_rng);
  opt_actor_ = nn::OptimizerState::adam(cfg_.lr_actor);
  opt_critic_ = nn::OptimizerState::adam(cfg_.lr_critic);
}

std::vector<ProblemInstance> ReinforceTrainer::batch_instances(int it) const {
  if (!cfg_.fixed_instances.empty()) return cfg_.fixed_instances;
  std::vector<ProblemInstance> out;
  out.reserve(static_cast<std::size_t>(cfg_.batch));
  GeneratorConfig g = cfg_.problem;
  const std::uint64_t base = Rng::derive_seed(Rng::derive_seed(cfg_.seed, 0x1257A9CE), static_cast<std::uint64_t>(it));
  for (int k = 0; k < cfg_.batch; ++k) {
    g.seed = Rng::derive_seed(base, static_cast<std::uint64_t>(k));
    ProblemInstance inst = generate_instance(g);
    inst.id = "train-" + std::to_string(it) + "-" + std::to_string(k);
    out.push_back(std::move(inst));
  }
  return out;
}

TrainMetrics ReinforceTrainer::step() {
  const auto t0 = Clock::now();
  const auto batch = batch_instances(iteration_);
  const std::uint64_t base = Rng::derive_seed(Rng::derive_seed(cfg_.seed, 0x5A3B1E), static_cast<std::uint64_t>(iteration_));
  std::vector<std::uint64_t> seeds;
  for (std::size_t k = 0; k < batch.size(); ++k) seeds.push_back(Rng::derive_seed(base, k));

  BatchGrads g = reinforce_gradients(batch, actor_, cfg_.actor, critic_, seeds, false, cfg_.threads);

  TrainMetrics m;
  m.iteration = iteration_ + 1;
  const double n = static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double adv = g.rewards[i] - g.values[i];
    m.mean_reward += g.rewards[i] / n;
    m.mean_advantage += adv / n;
    m.actor_loss += adv * g.log_probs[i] / n;
    m.critic_loss += adv * adv / n;
  }
  if (!std::isfinite(m.actor_loss) || !std::isfinite(m.critic_loss))
    throw NumericHealthError("non-finite loss at iteration " + std::to_string(m.iteration));
  m.grad_norm_pre_clip = nn::clip_global_norm(g.actor, cfg_.clip_norm);
  m.critic_grad_norm_pre_clip = nn::clip_global_norm(g.critic, cfg_.clip_norm);
  nn::adam_step(actor_, g.actor, opt_actor_);
  nn::adam_step(critic_, g.critic, opt_critic_);
  ++iteration_;
  wall_offset_ += seconds_since(t0);
  m.wall_s = wall_offset_;
  return m;
}

std::vector<TrainMetrics> ReinforceTrainer::run(int iterations) {
  const int target = iterations < 0 ? cfg_.total_iterations() : iteration_ + iterations;
  const auto t0 = Clock::now();

  std::ofstream metrics;
  if (!cfg_.metrics_path.empty()) {
    const bool fresh = iteration_ == 0 || !std::filesystem::exists(cfg_.metrics_path);
    metrics.open(cfg_.metrics_path, fresh ? std::ios::trunc : std::ios::app);
    if (!metrics) throw Error("cannot open metrics file '" + cfg_.metrics_path + "'");
    if (fresh) metrics << metrics_csv_header() << '\n';
  }
  std::ofstream eval_log;
  std::vector<ProblemInstance> eval_set;
  if (cfg_.eval_every > 0) {
    GeneratorConfig g = cfg_.problem;
    g.seed = Rng::derive_seed(cfg_.seed, 0xE7A1);
    eval_set = generate_instances(g, static_cast<std::size_t>(cfg_.eval_instances));
    if (!cfg_.metrics_path.empty()) {
      const std::string path = cfg_.metrics_path + ".eval.csv";
      const bool fresh = iteration_ == 0 || !std::filesystem::exists(path);
      eval_log.open(path, fresh ? std::ios::trunc : std::ios::app);
      if (fresh) eval_log << "iteration,greedy_mean\n";
    }
  }

  std::vector<TrainMetrics> out;
  while (iteration_ < target) {
    if (cfg_.time_budget_s > 0.0 && seconds_since(t0) > cfg_.time_budget_s) break;
    TrainMetrics m;
    try {
      m = step();
    } catch (const NumericHealthError& e) {
      std::string where = cfg_.checkpoint_dir.empty() ? "no checkpoint configured"
                                                      : "last good checkpoint kept in " + cfg_.checkpoint_dir;
      throw NumericHealthError(std::string(e.what()) + " (iteration " + std::to_string(iteration_ + 1) + "; " +
                               where + ")");
    }
    out.push_back(m);
    if (metrics.is_open()) write_metrics_row(metrics, m);
    if (cfg_.eval_every > 0 && iteration_ % cfg_.eval_every == 0) {
      const auto s = evaluate(actor_, cfg_.actor, eval_set, DecodeOptions{});
      if (eval_log.is_open()) eval_log << iteration_ << ',' << num(s.mean) << '\n' << std::flush;
    }
    if (cfg_.checkpoint_every > 0 && !cfg_.checkpoint_dir.empty() && iteration_ % cfg_.checkpoint_every == 0)
      save(cfg_.checkpoint_dir);
  }
  if (!cfg_.checkpoint_dir.empty()) save(cfg_.checkpoint_dir);
  return out;
}

void ReinforceTrainer::save(const std::filesystem::path& dir) const {
  nn::Checkpoint c = make_policy_checkpoint(actor_, cfg_.actor, critic_, cfg_.critic);
  c.meta["problem.kind"] = to_string(cfg_.problem.kind);
  c.meta["problem.n_customers"] = std::to_string(cfg_.problem.n_customers);
  c.meta["problem.capacity"] = std::to_string(cfg_.problem.capacity);
  c.meta["train.iteration"] = std::to_string(iteration_);
  c.meta["train.seed"] = std::to_string(cfg_.seed);
  c.meta["train.wall_s"] = num(wall_offset_);
  put_optimizer(c, "opt.actor", opt_actor_);
  put_optimizer(c, "opt.critic", opt_critic_);
  nn::save_checkpoint(c, dir);
}

void ReinforceTrainer::resume(const std::filesystem::path& dir) {
  const nn::Checkpoint c = nn::load_checkpoint(dir);
  auto expect = cfg_.actor.meta();
  for (const auto& [k, v] : cfg_.critic.meta()) expect[k] = v;
  expect["problem.kind"] = to_string(cfg_.problem.kind);
  nn::require_meta(c, expect);
  ParamStore actor = actor_, critic = critic_;
  nn::load_group_into(c, "actor", actor);
  nn::load_group_into(c, "critic", critic);
  auto oa = get_optimizer(c, "opt.actor");
  auto oc = get_optimizer(c, "opt.critic");
  actor_ = std::move(actor);
  critic_ = std::move(critic);
  opt_actor_ = std::move(oa);
  opt_critic_ = std::move(oc);
  iteration_ = static_cast<int>(meta_double(c, "train.iteration"));
  wall_offset_ = meta_double(c, "train.wall_s");
}

TrainOutcome reinforce_train(const TrainConfig& cfg) {
  ReinforceTrainer t(cfg);
  auto metrics = t.run();
  return {t.actor(), t.critic(), std::move(metrics)};
}

nn::Checkpoint make_policy_checkpoint(const ParamStore& actor, const ActorConfig& acfg, const ParamStore& critic,
                                      const CriticConfig& ccfg) {
  nn::Checkpoint c;
  c.meta = acfg.meta();
  for (const auto& [k, v] : ccfg.meta()) c.meta[k] = v;
  c.meta["actor.dropout"] = num(acfg.dropout);
  c.groups["actor"] = actor;
  c.groups["critic"] = critic;
  return c;
}

LoadedPolicy load_policy(const std::filesystem::path& dir, const ActorConfig* expected) {
  LoadedPolicy p;
  p.raw = nn::load_checkpoint(dir);
  if (expected) nn::require_meta(p.raw, expected->meta());
  p.actor_cfg.embed_dim = static_cast<int>(meta_double(p.raw, "actor.embed_dim"));
  p.actor_cfg.dynamic_features = static_cast<int>(meta_double(p.raw, "actor.dynamic_features"));
  if (p.raw.meta.count("actor.dropout")) p.actor_cfg.dropout = meta_double(p.raw, "actor.dropout");
  if (p.raw.meta.count("critic.hidden")) p.critic_cfg.hidden = static_cast<int>(meta_double(p.raw, "critic.hidden"));
  Rng rng(0);
  p.actor = init_actor(p.actor_cfg, rng);
  nn::load_group_into(p.raw, "actor", p.actor);
  if (p.raw.groups.count("critic")) {
    p.critic = init_critic(p.actor_cfg, p.critic_cfg, rng);
    nn::load_group_into(p.raw, "critic", p.critic);
  }
  return p;
}

// ---------------------------------------------------------------------------

EvalSummary evaluate(const ParamStore& actor, const ActorConfig& acfg, const std::vector<ProblemInstance>& instances,
                     const DecodeOptions& opt, std::uint64_t seed) {
  if (instances.empty()) throw ConfigError("evaluation needs at least one instance");
  EvalSummary s;
  s.solutions.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    Rng rng = Rng::stream(seed, i);
    s.solutions.push_back(rollout(instances[i], actor, acfg, opt, rng).solution);
  }
  const double n = static_cast<double>(instances.size());
  for (const auto& sol : s.solutions) {
    s.mean += sol.total_length / n;
    s.mean_wall_s += sol.wall_time_s / n;
  }
  if (instances.size() > 1) {
    double ss = 0.0;
    for (const auto& sol : s.solutions) ss += (sol.total_length - s.mean) * (sol.total_length - s.mean);
    s.stddev = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

void write_eval_csv(const std::filesystem::path& path, const std::vector<ProblemInstance>& instances,
                    const std::vector<Solution>& solutions) {
  if (instances.size() != solutions.size()) throw ConfigError("one solution per instance is required");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "instance_id,solver,length,wall_s,feasible\n";
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const Solution& s = solutions[i];
    bool ok = s.complete;
    if (ok && instances[i].kind == ProblemKind::cvrp) ok = validate_solution(instances[i], s.sequence, s.split_mode).feasible;
    out << s.instance_id << ',' << s.solver_tag << ',' << num(s.total_length) << ',' << num(s.wall_time_s) << ','
        << (ok ? 1 : 0) << '\n';
  }
}

// ---------------------------------------------------------------------------

void A3cConfig::validate() const {
  svrp.validate();
  actor.validate();
  critic.validate();
  if (svrp.horizon <= 0.0) throw ConfigError("a3c needs a positive horizon");
  if (actor.dynamic_features != 3) throw ConfigError("a3c actor needs three dynamic features");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  if (sync_period < 1) throw ConfigError("sync_period must be at least 1");
  if (lr <= 0.0 || clip_norm <= 0.0) throw ConfigError("lr and clip_norm must be positive");
  if (discount < 0.0 || discount > 1.0) throw ConfigError("discount must lie in [0, 1]");
  if (max_updates <= 0 && time_budget_s <= 0.0) throw ConfigError("a3c needs max_updates or a time budget");
}

namespace {

struct Central {
  std::mutex mu;
  ParamStore actor, critic;
  nn::OptimizerState opt_actor, opt_critic;
  int updates = 0;
  int episodes = 0;
  std::vector<TrainMetrics> metrics;
  std::ofstream csv;
  Clock::time_point start;
};

class A3cWorker {
 public:
  A3cWorker(const A3cConfig& cfg, int id, const Central& central)
      : cfg_(cfg),
        id_(id),
        actor_(central.actor),
        critic_(central.critic),
        agent_(actor_, cfg.actor),
        rng_(Rng::stream(cfg.seed, 0xA3C000 + static_cast<std::uint64_t>(id))) {}

  // Runs `sync_period` decision epochs, then pushes the accumulated
  // gradients to the central store and pulls fresh weights.
  void run_block(Central& c) {
    Grads ga, gc;
    double sum_r = 0.0, sum_actor = 0.0, sum_critic = 0.0;
    for (int k = 0; k < cfg_.sync_period; ++k) {
      if (!cur_) start_episode();
      const SvrpStepResult res = svrp_step(env_, cur_->decision.action);
      std::unique_ptr<Pending> next;
      double v_next = 0.0;
      if (!env_.done) {
        next = decide();
        v_next = next->value.item();
      }
      const double v = cur_->value.item();
      const double adv = res.reward + cfg_.discount * v_next - v;
      cur_->actor_tape->backward(cur_->decision.log_prob, -adv);
      cur_->critic_tape->backward(cur_->value, -2.0 * adv);
      cur_->actor_tape->add_param_grads(ga);
      cur_->critic_tape->add_param_grads(gc);
      sum_r += res.reward;
      sum_actor += -adv * cur_->decision.log_prob.item();
      sum_critic += adv * adv;
      cur_ = std::move(next);
      if (env_.done) {
        ++episodes_done_;
        cur_.reset();
      }
    }

    std::lock_guard<std::mutex> lock(c.mu);
    TrainMetrics m;
    m.grad_norm_pre_clip = nn::clip_global_norm(ga, cfg_.clip_norm);
    m.critic_grad_norm_pre_clip = nn::clip_global_norm(gc, cfg_.clip_norm);
    nn::rmsprop_step(c.actor, ga, c.opt_actor);
    nn::rmsprop_step(c.critic, gc, c.opt_critic);
    ++c.updates;
    c.episodes += episodes_done_;
    episodes_done_ = 0;
    const double n = cfg_.sync_period;
    m.iteration = c.updates;
    m.mean_reward = sum_r / n;
    m.actor_loss = sum_actor / n;
    m.critic_loss = sum_critic / n;
    m.wall_s = seconds_since(c.start);
    c.metrics.push_back(m);
    if (c.csv.is_open()) write_metrics_row(c.csv, m);
    if (cur_) {
      cur_->actor_tape->freeze_params();
      cur_->critic_tape->freeze_params();
    }
    actor_ = c.actor;
    critic_ = c.critic;
  }

 private:
  struct Pending {
    std::unique_ptr<Tape> actor_tape, critic_tape;
    SvrpAgent::Decision decision;
    nn::Var value;
  };

  void start_episode() {
    SvrpConfig sc = cfg_.svrp;
    sc.seed = Rng::derive_seed(Rng::derive_seed(cfg_.seed, static_cast<std::uint64_t>(id_)), episode_++);
    env_ = svrp_reset(sc);
    agent_.reset();
    cur_ = decide();
  }

  std::unique_ptr<Pending> decide() {
    auto p = std::make_unique<Pending>();
    p->actor_tape = std::make_unique<Tape>(true);
    p->critic_tape = std::make_unique<Tape>(true);
    p->decision = agent_.decide(*p->actor_tape, svrp_observe(env_), true, rng_, &rng_);
    p->value = critic_head(*p->critic_tape, critic_, p->decision.probs, p->decision.embedded);
    return p;
  }

  const A3cConfig& cfg_;
  int id_;
  ParamStore actor_, critic_;
  SvrpAgent agent_;
  Rng rng_;
  SvrpState env_;
  std::unique_ptr<Pending> cur_;
  std::uint64_t episode_ = 0;
  int episodes_done_ = 0;
};

}  // namespace

A3cOutcome a3c_train(const A3cConfig& cfg) {
  cfg.validate();
  Rng actor_rng = Rng::stream(cfg.seed, 0xAC7082);
  Rng critic_rng = Rng::stream(cfg.seed, 0xC2171C);
  ParamStore actor = init_actor(cfg.actor, actor_rng);
  ParamStore critic = init_critic(cfg.actor, cfg.critic, critic_rng);
  return a3c_train(cfg, std::move(actor), std::move(critic));
}

A3cOutcome a3c_train(const A3cConfig& cfg, ParamStore actor, ParamStore critic) {
  cfg.validate();
  Central c;
  c.actor = std::move(actor);
  c.critic = std::move(critic);
  c.opt_actor = nn::OptimizerState::rmsprop(cfg.lr);
  c.opt_critic = nn::OptimizerState::rmsprop(cfg.lr);
  c.start = Clock::now();
  if (!cfg.metrics_path.empty()) {
    c.csv.open(cfg.metrics_path, std::ios::trunc);
    if (!c.csv) throw Error("cannot open metrics file '" + cfg.metrics_path + "'");
    c.csv << metrics_csv_header() << '\n';
  }

  std::vector<std::unique_ptr<A3cWorker>> workers;
  for (int w = 0; w < cfg.workers; ++w) workers.push_back(std::make_unique<A3cWorker>(cfg, w, c));

  std::atomic<bool> stop{false};
  auto should_stop = [&]() {
    if (stop.load()) return true;
    std::lock_guard<std::mutex> lock(c.mu);
    if (cfg.max_updates > 0 && c.updates >= cfg.max_updates) return true;
    if (cfg.time_budget_s > 0.0 && seconds_since(c.start) > cfg.time_budget_s) return true;
    return false;
  };

  auto save_central = [&]() {
    if (cfg.checkpoint_dir.empty()) return;
    std::lock_guard<std::mutex> lock(c.mu);
    nn::Checkpoint ck = make_policy_checkpoint(c.actor, cfg.actor, c.critic, cfg.critic);
    ck.meta["a3c.updates"] = std::to_string(c.updates);
    ck.meta["a3c.seed"] = std::to_string(cfg.seed);
    nn::save_checkpoint(ck, cfg.checkpoint_dir);
  };

  try {
    if (cfg.deterministic) {
      while (!should_stop())
        for (auto& w : workers) {
          if (should_stop()) break;
          w->run_block(c);
        }
    } else {
      std::vector<std::thread> threads;
      std::vector<std::exception_ptr> errors(workers.size());
      for (std::size_t i = 0; i < workers.size(); ++i) {
        threads.emplace_back([&, i] {
          try {
            while (!should_stop()) workers[i]->run_block(c);
          } catch (...) {
            errors[i] = std::current_exception();
            stop = true;
          }
        });
      }
      for (auto& t : threads) t.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
  } catch (...) {
    save_central();
    throw;
  }
  save_central();

  A3cOutcome out;
  out.actor = std::move(c.actor);
  out.critic = std::move(c.critic);
  out.metrics = std::move(c.metrics);
  out.updates = c.updates;
  out.episodes = c.episodes;
  return out;
}

}  // namespace vrprl
