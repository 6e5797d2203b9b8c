#include "vrprl/config.hpp"

#include <fstream>

#include "vrprl/errors.hpp"

namespace vrprl {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(std::string("unknown key '") + key + "' in " + what);
  }
}

namespace {

template <class T>
void get(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

GeneratorConfig generator_config_from_json(const json& j) {
  check_keys(j, {"kind", "n_customers", "capacity", "demand_lo", "demand_hi", "seed"}, "problem config");
  GeneratorConfig g;
  std::string kind = "cvrp";
  get(j, "kind", kind);
  if (kind == "cvrp")
    g.kind = ProblemKind::cvrp;
  else if (kind == "tsp")
    g.kind = ProblemKind::tsp;
  else
    throw ConfigError("unknown problem kind '" + kind + "'");
  get(j, "n_customers", g.n_customers);
  if (g.kind == ProblemKind::tsp)
    g.capacity = 0;
  else if (g.n_customers == 10 || g.n_customers == 20 || g.n_customers == 50 || g.n_customers == 100)
    g.capacity = reference_capacity(g.n_customers);
  get(j, "capacity", g.capacity);
  get(j, "demand_lo", g.demand_lo);
  get(j, "demand_hi", g.demand_hi);
  get(j, "seed", g.seed);
  g.validate();
  return g;
}

SvrpConfig svrp_config_from_json(const json& j) {
  check_keys(j, {"horizon", "arrival_rate", "patience", "speed", "depot", "capacity", "demand_lo", "demand_hi", "seed"},
             "svrp config");
  SvrpConfig c;
  get(j, "horizon", c.horizon);
  get(j, "arrival_rate", c.arrival_rate);
  get(j, "patience", c.patience);
  get(j, "speed", c.speed);
  if (j.contains("depot")) {
    const auto& d = j.at("depot");
    if (!d.is_array() || d.size() != 2) throw ConfigError("depot must be [x, y]");
    c.depot = {d[0].get<double>(), d[1].get<double>()};
  }
  get(j, "capacity", c.capacity);
  get(j, "demand_lo", c.demand_lo);
  get(j, "demand_hi", c.demand_hi);
  get(j, "seed", c.seed);
  c.validate();
  return c;
}

ActorConfig actor_config_from_json(const json& j, ActorConfig base) {
  check_keys(j, {"embed_dim", "dynamic_features", "dropout"}, "actor config");
  get(j, "embed_dim", base.embed_dim);
  get(j, "dynamic_features", base.dynamic_features);
  get(j, "dropout", base.dropout);
  base.validate();
  return base;
}

CriticConfig critic_config_from_json(const json& j) {
  check_keys(j, {"hidden"}, "critic config");
  CriticConfig c;
  get(j, "hidden", c.hidden);
  c.validate();
  return c;
}

TrainConfig train_config_from_json(const json& j) {
  check_keys(j,
             {"problem", "actor", "critic", "batch", "lr_actor", "lr_critic", "clip_norm", "iterations", "epochs",
              "instances_per_epoch", "eval_every", "eval_instances", "checkpoint_every", "checkpoint_dir",
              "metrics_path", "seed", "threads", "time_budget_s", "fixed_instances_path", "resume_from"},
             "train config");
  TrainConfig c;
  if (j.contains("problem")) c.problem = generator_config_from_json(j.at("problem"));
  c.actor = ActorConfig::for_problem(c.problem.kind);
  if (j.contains("actor")) c.actor = actor_config_from_json(j.at("actor"), c.actor);
  if (j.contains("critic")) c.critic = critic_config_from_json(j.at("critic"));
  get(j, "batch", c.batch);
  get(j, "lr_actor", c.lr_actor);
  get(j, "lr_critic", c.lr_critic);
  get(j, "clip_norm", c.clip_norm);
  get(j, "iterations", c.iterations);
  get(j, "epochs", c.epochs);
  get(j, "instances_per_epoch", c.instances_per_epoch);
  get(j, "eval_every", c.eval_every);
  get(j, "eval_instances", c.eval_instances);
  get(j, "checkpoint_every", c.checkpoint_every);
  get(j, "checkpoint_dir", c.checkpoint_dir);
  get(j, "metrics_path", c.metrics_path);
  get(j, "seed", c.seed);
  get(j, "threads", c.threads);
  get(j, "time_budget_s", c.time_budget_s);
  if (j.contains("fixed_instances_path"))
    c.fixed_instances = read_instances(j.at("fixed_instances_path").get<std::string>());
  c.validate();
  return c;
}

A3cConfig a3c_config_from_json(const json& j) {
  check_keys(j,
             {"svrp", "actor", "critic", "workers", "sync_period", "lr", "discount", "clip_norm", "max_updates",
              "time_budget_s", "deterministic", "seed", "metrics_path", "checkpoint_dir"},
             "a3c config");
  A3cConfig c;
  if (j.contains("svrp")) c.svrp = svrp_config_from_json(j.at("svrp"));
  if (j.contains("actor")) c.actor = actor_config_from_json(j.at("actor"), c.actor);
  if (j.contains("critic")) c.critic = critic_config_from_json(j.at("critic"));
  get(j, "workers", c.workers);
  get(j, "sync_period", c.sync_period);
  get(j, "lr", c.lr);
  get(j, "discount", c.discount);
  get(j, "clip_norm", c.clip_norm);
  get(j, "max_updates", c.max_updates);
  get(j, "time_budget_s", c.time_budget_s);
  get(j, "deterministic", c.deterministic);
  get(j, "seed", c.seed);
  get(j, "metrics_path", c.metrics_path);
  get(j, "checkpoint_dir", c.checkpoint_dir);
  c.validate();
  return c;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config '") + path.string() + "' is not valid JSON: " + e.what());
  }
}

}  // namespace vrprl
