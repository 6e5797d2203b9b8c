#include "vrprl/policy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "vrprl/errors.hpp"
#include "vrprl/nn/optim.hpp"

namespace vrprl {

using nn::Tape;
using nn::Tensor;
using nn::Var;

void ActorConfig::validate() const {
  if (embed_dim < 1) throw ConfigError("embed_dim must be positive");
  if (dynamic_features < 0) throw ConfigError("dynamic_features must be non-negative");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
}

std::map<std::string, std::string> ActorConfig::meta() const {
  return {{"actor.embed_dim", std::to_string(embed_dim)},
          {"actor.dynamic_features", std::to_string(dynamic_features)}};
}

ActorConfig ActorConfig::for_problem(ProblemKind kind) {
  ActorConfig c;
  c.dynamic_features = kind == ProblemKind::tsp ? 0 : 2;
  return c;
}

ActorConfig ActorConfig::for_svrp() {
  ActorConfig c;
  c.dynamic_features = 3;
  return c;
}

void CriticConfig::validate() const {
  if (hidden < 1) throw ConfigError("critic hidden size must be positive");
}

std::map<std::string, std::string> CriticConfig::meta() const {
  return {{"critic.hidden", std::to_string(hidden)}};
}

nn::ParamStore init_actor(const ActorConfig& cfg, Rng& rng) {
  cfg.validate();
  const int d = cfg.embed_dim;
  nn::ParamStore p;
  auto weight = [&](const std::string& name, int rows, int cols) { p.add(name, nn::xavier_init({rows, cols}, rng)); };
  auto bias = [&](const std::string& name, int n) { p.add(name, Tensor({n}, 0.0)); };
  weight("static.w", d, 2);
  bias("static.b", d);
  if (cfg.dynamic_features > 0) weight("dynamic.w", d, cfg.dynamic_features);
  bias("dynamic.b", d);
  weight("lstm.wx", 4 * d, d);
  weight("lstm.wh", 4 * d, d);
  bias("lstm.b", 4 * d);
  weight("attn.w", d, 3 * d);
  p.add("attn.v", nn::xavier_init({d}, rng));
  weight("ptr.w", d, 4 * d);
  p.add("ptr.v", nn::xavier_init({d}, rng));
  return p;
}

nn::ParamStore init_critic(const ActorConfig& actor, const CriticConfig& cfg, Rng& rng) {
  actor.validate();
  cfg.validate();
  const int d = actor.embed_dim;
  nn::ParamStore p;
  p.add("proj.w", nn::xavier_init({d, 2 * d}, rng));
  p.add("proj.b", Tensor({d}, 0.0));
  p.add("hidden.w", nn::xavier_init({cfg.hidden, d}, rng));
  p.add("hidden.b", Tensor({cfg.hidden}, 0.0));
  p.add("out.w", nn::xavier_init({1, cfg.hidden}, rng));
  p.add("out.b", Tensor({1}, 0.0));
  return p;
}

Tensor static_features(const ProblemInstance& instance) {
  const int n = instance.num_customers();
  const bool depot = instance.kind == ProblemKind::cvrp;
  Tensor t = Tensor::matrix(depot ? n + 1 : n, 2);
  for (int i = 0; i < n; ++i) {
    t.at(i, 0) = instance.customers[static_cast<std::size_t>(i)].location.x;
    t.at(i, 1) = instance.customers[static_cast<std::size_t>(i)].location.y;
  }
  if (depot) {
    t.at(n, 0) = instance.depot.x;
    t.at(n, 1) = instance.depot.y;
  }
  return t;
}

Tensor dynamic_features(const CvrpState& state) {
  const int n = state.num_customers();
  const double q = state.capacity;
  Tensor t = Tensor::matrix(n + 1, 2);
  for (int i = 0; i < n; ++i) {
    const double dem = state.remaining_demand[static_cast<std::size_t>(i)];
    t.at(i, 0) = dem / q;
    t.at(i, 1) = (state.load - dem) / q;
  }
  t.at(n, 0) = 0.0;
  t.at(n, 1) = state.load / q;
  return t;
}

// ---------------------------------------------------------------------------

ActorGraph::ActorGraph(Tape& tape, const nn::ParamStore& params, const ActorConfig& cfg, const Tensor& static_inputs)
    : tape_(tape), cfg_(cfg), m_(static_inputs.rows()), d_(cfg.embed_dim) {
  if (static_inputs.cols() != 2) throw ShapeError("static inputs must have two columns");
  const int d = d_;
  s_bar_ = nn::embedding_affine(tape.constant(static_inputs), tape.param(params, "static.w"),
                                tape.param(params, "static.b"));
  b_dyn_ = tape.param(params, "dynamic.b");
  if (cfg.dynamic_features > 0) w_dyn_ = tape.param(params, "dynamic.w");
  lstm_wx_ = tape.param(params, "lstm.wx");
  lstm_wh_ = tape.param(params, "lstm.wh");
  lstm_b_ = tape.param(params, "lstm.b");
  attn_v_ = tape.param(params, "attn.v");
  ptr_v_ = tape.param(params, "ptr.v");

  // W_a[x̄; h] = Wa_s s̄ + Wa_d (Wdyn f + b) + Wa_h h, and the same for W_c
  // with the context in place of h.
  Var wa = tape.param(params, "attn.w");
  Var wc = tape.param(params, "ptr.w");
  Var wa_s = nn::slice_cols(wa, 0, d), wa_d = nn::slice_cols(wa, d, 2 * d);
  Var wc_s = nn::slice_cols(wc, 0, d), wc_d = nn::slice_cols(wc, d, 2 * d);
  attn_h_ = nn::slice_cols(wa, 2 * d, 3 * d);
  ptr_c_ = nn::slice_cols(wc, 2 * d, 4 * d);
  attn_static_ = nn::matmul_nt(s_bar_, wa_s);
  ptr_static_ = nn::matmul_nt(s_bar_, wc_s);
  attn_dyn_bias_ = nn::matmul_nt(b_dyn_, wa_d);
  ptr_dyn_bias_ = nn::matmul_nt(b_dyn_, wc_d);
  if (cfg.dynamic_features > 0) {
    attn_dyn_ = nn::matmul(wa_d, w_dyn_);
    ptr_dyn_ = nn::matmul(wc_d, w_dyn_);
  }
}

ActorGraph::Recurrent ActorGraph::initial_state() {
  return {tape_.constant(Tensor::matrix(1, d_)), tape_.constant(Tensor::matrix(1, d_))};
}

ActorGraph::Recurrent ActorGraph::constant_state(const Tensor& h, const Tensor& c) {
  return {tape_.constant(h), tape_.constant(c)};
}

Var ActorGraph::dynamic_embedding(const Tensor& dyn) {
  if (cfg_.dynamic_features == 0) return nn::add_row(tape_.constant(Tensor::matrix(m_, d_)), b_dyn_);
  return nn::embedding_affine(tape_.constant(dyn), w_dyn_, b_dyn_);
}

Var ActorGraph::decoder_input(int node) { return nn::select_row(s_bar_, node); }

ActorGraph::Step ActorGraph::step(const Recurrent& rec, Var input, const Tensor& dyn,
                                  const std::vector<std::uint8_t>& mask, Rng* dropout_rng) {
  if (cfg_.dynamic_features > 0 && (dyn.rows() != m_ || dyn.cols() != cfg_.dynamic_features))
    throw ShapeError("dynamic inputs " + dyn.shape_string() + " do not match " + std::to_string(m_) + " nodes x " +
                     std::to_string(cfg_.dynamic_features));
  nn::LstmOut cell = nn::lstm_cell(input, rec.h, rec.c, lstm_wx_, lstm_wh_, lstm_b_);
  Var h = dropout_rng ? nn::dropout(cell.h, cfg_.dropout, *dropout_rng) : cell.h;

  Var d_bar;
  Var attn_pre = attn_static_, ptr_pre = ptr_static_;
  if (cfg_.dynamic_features > 0) {
    Var f = tape_.constant(dyn);
    d_bar = nn::embedding_affine(f, w_dyn_, b_dyn_);
    attn_pre = nn::add(attn_pre, nn::matmul_nt(f, attn_dyn_));
    ptr_pre = nn::add(ptr_pre, nn::matmul_nt(f, ptr_dyn_));
  } else {
    d_bar = dynamic_embedding(dyn);
  }

  Var ua = nn::add_row(attn_pre, nn::add(attn_dyn_bias_, nn::matmul_nt(h, attn_h_)));
  Var align = nn::softmax(nn::matmul_nt(attn_v_, nn::tanh(ua)));
  Var context = nn::concat_cols(nn::pool_rows(align, s_bar_), nn::pool_rows(align, d_bar));
  Var uc = nn::add_row(ptr_pre, nn::add(ptr_dyn_bias_, nn::matmul_nt(context, ptr_c_)));
  Var probs = nn::masked_softmax(nn::matmul_nt(ptr_v_, nn::tanh(uc)), mask);
  return {probs, align, nn::concat_cols(s_bar_, d_bar), {cell.h, cell.c}};
}

// ---------------------------------------------------------------------------

std::string to_string(DecodeMode m) {
  switch (m) {
    case DecodeMode::greedy: return "greedy";
    case DecodeMode::sample: return "sample";
    case DecodeMode::beam: return "beam";
  }
  return "?";
}

DecodeMode decode_mode_from_string(const std::string& s) {
  if (s == "greedy") return DecodeMode::greedy;
  if (s == "sample") return DecodeMode::sample;
  if (s == "beam") return DecodeMode::beam;
  throw ConfigError("unknown decode mode '" + s + "'");
}

int argmax(const Tensor& p) {
  int best = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

int sample_index(const Tensor& p, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  int last = -1;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    acc += p[i];
    last = static_cast<int>(i);
    if (u < acc) return last;
  }
  if (last < 0) throw ContractViolation("cannot sample from an all-zero distribution");
  return last;  // rounding left the total just below u
}

namespace {

// Uniform view of the CVRP and TSP environments for the decoders.
struct CvrpEnv {
  const ProblemInstance& inst;
  CvrpState state;

  int start_node() const { return inst.depot_index(); }
  bool terminal() const { return state.terminal(); }
  bool complete() const { return state.done; }
  std::vector<std::uint8_t> mask() const { return feasible_mask(state); }
  Tensor dyn() const { return dynamic_features(state); }
  void apply(int a) { apply_action(state, a); }
  const std::vector<int>& sequence() const { return state.sequence; }
  double length() const { return tour_length(inst, state.sequence); }
};

struct TspEnv {
  const ProblemInstance& inst;
  TspState state;

  int start_node() const { return state.position; }
  bool terminal() const { return state.done; }
  bool complete() const { return state.done; }
  std::vector<std::uint8_t> mask() const { return tsp_mask(state); }
  Tensor dyn() const { return Tensor(); }
  void apply(int a) { tsp_apply(state, a); }
  const std::vector<int>& sequence() const { return state.sequence; }
  double length() const { return tsp_tour_length(inst, state.sequence); }
};

std::vector<double> row_values(const Tensor& t) { return t.values(); }

template <class Env>
RolloutResult decode_single(Env env, ActorGraph& graph, Tape& tape, const DecodeOptions& opt, Rng& rng) {
  RolloutResult out;
  auto rec = graph.initial_state();
  int prev = env.start_node();
  Var total;
  int t = 0;
  while (!env.terminal()) {
    const auto mask = env.mask();
    auto st = graph.step(rec, graph.decoder_input(prev), env.dyn(), mask, opt.inference ? nullptr : &rng);
    const Tensor& p = st.probs.value();
    const int a = opt.mode == DecodeMode::sample ? sample_index(p, rng) : argmax(p);
    out.solution.per_step_logprob.push_back(std::log(p[static_cast<std::size_t>(a)]));
    if (tape.recording()) {
      Var lp = nn::log_at(st.probs, a);
      total = total.valid() ? nn::add(total, lp) : lp;
    }
    if (opt.record_trace) out.trace.push_back({t, row_values(st.align.value()), row_values(p), a});
    env.apply(a);
    prev = a;
    rec = st.next;
    ++t;
  }
  out.log_prob = total;
  out.complete = env.complete();
  out.solution.sequence = env.sequence();
  out.solution.total_length = env.length();
  out.solution.complete = out.complete;
  return out;
}

template <class Env>
RolloutResult decode_beam(const Env& start, ActorGraph& graph, const DecodeOptions& opt) {
  struct Beam {
    Env env;
    ActorGraph::Recurrent rec;
    int prev;
    double logp;
    std::vector<double> step_logp;
  };
  struct Candidate {
    double logp;
    int beam;
    int action;
  };
  const int width = opt.beam_width;
  std::vector<Beam> live{{start, graph.initial_state(), start.start_node(), 0.0, {}}};
  std::vector<Beam> done;
  std::vector<Beam> capped;

  while (!live.empty() && static_cast<int>(done.size()) < width) {
    std::vector<Candidate> cand;
    std::vector<ActorGraph::Step> steps;
    steps.reserve(live.size());
    for (std::size_t b = 0; b < live.size(); ++b) {
      auto& beam = live[b];
      steps.push_back(graph.step(beam.rec, graph.decoder_input(beam.prev), beam.env.dyn(), beam.env.mask(), nullptr));
      const Tensor& p = steps.back().probs.value();
      for (std::size_t a = 0; a < p.size(); ++a)
        if (p[a] > 0.0) cand.push_back({beam.logp + std::log(p[a]), static_cast<int>(b), static_cast<int>(a)});
    }
    std::stable_sort(cand.begin(), cand.end(), [](const Candidate& x, const Candidate& y) {
      if (x.logp != y.logp) return x.logp > y.logp;
      if (x.beam != y.beam) return x.beam < y.beam;
      return x.action < y.action;
    });
    if (static_cast<int>(cand.size()) > width) cand.resize(static_cast<std::size_t>(width));

    std::vector<Beam> next;
    for (const auto& c : cand) {
      const auto b = static_cast<std::size_t>(c.beam);
      Beam nb{live[b].env, steps[b].next, c.action, c.logp, live[b].step_logp};
      nb.step_logp.push_back(std::log(steps[b].probs.value()[static_cast<std::size_t>(c.action)]));
      nb.env.apply(c.action);
      if (nb.env.complete())
        done.push_back(std::move(nb));
      else if (nb.env.terminal())
        capped.push_back(std::move(nb));
      else
        next.push_back(std::move(nb));
    }
    live = std::move(next);
  }

  RolloutResult out;
  const std::vector<Beam>& pool = done.empty() ? capped : done;
  if (pool.empty()) throw ContractViolation("beam search ended without any sequence");
  std::size_t best = 0;
  std::vector<double> lengths;
  for (const auto& b : pool) lengths.push_back(b.env.length());
  for (std::size_t i = 1; i < pool.size(); ++i) {
    if (done.empty()) {
      if (pool[i].logp > pool[best].logp) best = i;
    } else if (lengths[i] < lengths[best]) {
      best = i;
    }
  }
  out.complete = !done.empty();
  out.solution.sequence = pool[best].env.sequence();
  out.solution.total_length = lengths[best];
  out.solution.per_step_logprob = pool[best].step_logp;
  out.solution.complete = out.complete;
  return out;
}

template <class Env>
RolloutResult decode(Env env, ActorGraph& graph, Tape& tape, const DecodeOptions& opt, Rng& rng) {
  if (opt.mode == DecodeMode::beam) {
    if (opt.beam_width < 1) throw ConfigError("beam width must be at least 1");
    if (tape.recording()) throw ContractViolation("beam search runs on a non-recording tape");
    return decode_beam(env, graph, opt);
  }
  return decode_single(std::move(env), graph, tape, opt, rng);
}

}  // namespace

RolloutResult rollout(const ProblemInstance& instance, const nn::ParamStore& actor, const ActorConfig& cfg,
                      const DecodeOptions& opt, Rng& rng, Tape* tape) {
  const auto t0 = std::chrono::steady_clock::now();
  Tape local(false);
  Tape& tp = tape ? *tape : local;
  ActorGraph graph(tp, actor, cfg, static_features(instance));
  RolloutResult r;
  if (instance.kind == ProblemKind::tsp) {
    if (opt.split_mode) throw KindError("split delivery does not apply to tsp");
    r = decode(TspEnv{instance, tsp_reset(instance, rng)}, graph, tp, opt, rng);
  } else {
    r = decode(CvrpEnv{instance, reset(instance, opt.split_mode)}, graph, tp, opt, rng);
  }
  r.solution.instance_id = instance.id;
  r.solution.split_mode = opt.split_mode;
  r.solution.solver_tag = opt.mode == DecodeMode::beam ? "rl-bs(" + std::to_string(opt.beam_width) + ")"
                                                       : "rl-" + to_string(opt.mode);
  if (opt.split_mode) r.solution.solver_tag += "-sd";
  r.solution.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

FirstStep actor_first_step(const ProblemInstance& instance, const nn::ParamStore& actor, const ActorConfig& cfg) {
  Tape tape(false);
  ActorGraph graph(tape, actor, cfg, static_features(instance));
  Tensor dyn;
  std::vector<std::uint8_t> mask;
  int start = 0;
  if (instance.kind == ProblemKind::tsp) {
    const auto s = tsp_reset_at(instance, 0);
    mask = tsp_mask(s);
  } else {
    const auto s = reset(instance);
    mask = feasible_mask(s);
    dyn = dynamic_features(s);
    start = instance.depot_index();
  }
  auto st = graph.step(graph.initial_state(), graph.decoder_input(start), dyn, mask, nullptr);
  return {st.probs.value(), st.embedded.value()};
}

Var critic_head(Tape& tape, const nn::ParamStore& critic, const Tensor& probs, const Tensor& embedded) {
  Var e = nn::pool_rows(tape.constant(probs), tape.constant(embedded));
  Var z = nn::embedding_affine(e, tape.param(critic, "proj.w"), tape.param(critic, "proj.b"));
  Var h = nn::relu(nn::embedding_affine(z, tape.param(critic, "hidden.w"), tape.param(critic, "hidden.b")));
  return nn::embedding_affine(h, tape.param(critic, "out.w"), tape.param(critic, "out.b"));
}

double critic_value(const ProblemInstance& instance, const nn::ParamStore& actor, const ActorConfig& acfg,
                    const nn::ParamStore& critic) {
  const FirstStep fs = actor_first_step(instance, actor, acfg);
  Tape tape(false);
  return critic_head(tape, critic, fs.probs, fs.embedded).item();
}

std::vector<StepTrace> export_attention(const ProblemInstance& instance, const nn::ParamStore& actor,
                                        const ActorConfig& cfg, int first, int last) {
  DecodeOptions opt;
  opt.record_trace = true;
  Rng rng(0);
  auto r = rollout(instance, actor, cfg, opt, rng);
  std::vector<StepTrace> out;
  for (auto& t : r.trace)
    if (t.step >= first && (last < 0 || t.step <= last)) out.push_back(std::move(t));
  return out;
}

std::string step_trace_to_json(const StepTrace& t) {
  nlohmann::json j;
  j["step"] = t.step;
  j["a_t"] = t.align;
  j["p_t"] = t.probs;
  j["chosen"] = t.chosen;
  return j.dump();
}

// ---------------------------------------------------------------------------

SvrpObservation svrp_observe(const SvrpState& s) {
  const int k = static_cast<int>(s.active.size());
  const int m = k + 2;
  const double q = s.cfg.capacity;
  SvrpObservation o;
  o.static_inputs = Tensor::matrix(m, 2);
  o.dynamic = Tensor::matrix(m, 3);
  o.mask.assign(static_cast<std::size_t>(m), 1);
  o.actions.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < k; ++i) {
    const auto& c = s.active[static_cast<std::size_t>(i)];
    o.static_inputs.at(i, 0) = c.location.x;
    o.static_inputs.at(i, 1) = c.location.y;
    o.dynamic.at(i, 0) = c.demand / q;
    o.dynamic.at(i, 1) = (s.load - c.demand) / q;
    o.dynamic.at(i, 2) = (s.clock - c.arrival_time) / s.cfg.patience;
    o.mask[static_cast<std::size_t>(i)] = s.load > 0 && c.demand > 0;
    o.actions.push_back(SvrpAction::customer(c.id));
  }
  o.static_inputs.at(k, 0) = s.cfg.depot.x;
  o.static_inputs.at(k, 1) = s.cfg.depot.y;
  o.dynamic.at(k, 1) = s.load / q;
  o.actions.push_back(SvrpAction::depot());
  o.static_inputs.at(k + 1, 0) = s.vehicle_position.x;
  o.static_inputs.at(k + 1, 1) = s.vehicle_position.y;
  o.dynamic.at(k + 1, 1) = s.load / q;
  o.actions.push_back(SvrpAction::stay());
  o.stay_node = k + 1;
  return o;
}

SvrpAgent::SvrpAgent(const nn::ParamStore& actor, const ActorConfig& cfg) : actor_(actor), cfg_(cfg) {
  if (cfg.dynamic_features != 3) throw ConfigError("the svrp policy needs three dynamic features");
  reset();
}

void SvrpAgent::reset() {
  h_ = Tensor::matrix(1, cfg_.embed_dim);
  c_ = Tensor::matrix(1, cfg_.embed_dim);
}

SvrpAgent::Decision SvrpAgent::decide(Tape& tape, const SvrpObservation& obs, bool sample, Rng& rng,
                                      Rng* dropout_rng) {
  ActorGraph graph(tape, actor_, cfg_, obs.static_inputs);
  auto st = graph.step(graph.constant_state(h_, c_), graph.decoder_input(obs.stay_node), obs.dynamic, obs.mask,
                       dropout_rng);
  Decision d;
  d.probs = st.probs.value();
  d.node = sample ? sample_index(d.probs, rng) : argmax(d.probs);
  d.action = obs.actions[static_cast<std::size_t>(d.node)];
  if (tape.recording()) d.log_prob = nn::log_at(st.probs, d.node);
  d.embedded = st.embedded.value();
  h_ = st.next.h.value();
  c_ = st.next.c.value();
  return d;
}

int svrp_policy_episode(const SvrpConfig& cfg, const nn::ParamStore& actor, const ActorConfig& acfg, bool sample,
                        Rng& rng) {
  SvrpState s = svrp_reset(cfg);
  SvrpAgent agent(actor, acfg);
  while (!s.done) {
    Tape tape(false);
    const auto d = agent.decide(tape, svrp_observe(s), sample, rng, nullptr);
    svrp_step(s, d.action);
  }
  return s.satisfied_units;
}

}  // namespace vrprl
