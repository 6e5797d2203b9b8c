#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vrprl/env.hpp"
#include "vrprl/instances.hpp"
#include "vrprl/nn/tape.hpp"
#include "vrprl/nn/tensor.hpp"
#include "vrprl/rng.hpp"
#include "vrprl/svrp.hpp"

namespace vrprl {

struct ActorConfig {
  int embed_dim = 128;
  // Per-node dynamic inputs: 2 for CVRP (demand, load after visit), 0 for
  // TSP, 3 for the stochastic VRP (adds time in system).
  int dynamic_features = 2;
  double dropout = 0.1;

  void validate() const;
  std::map<std::string, std::string> meta() const;
  static ActorConfig for_problem(ProblemKind kind);
  static ActorConfig for_svrp();
};

struct CriticConfig {
  int hidden = 128;

  void validate() const;
  std::map<std::string, std::string> meta() const;
};

// Parameter names, actor store:
//   static.w [D,2] static.b [D]      dynamic.w [D,F] dynamic.b [D]
//   lstm.wx [4D,D] lstm.wh [4D,D] lstm.b [4D]
//   attn.w [D,3D] attn.v [D]         ptr.w [D,4D] ptr.v [D]
// critic store:
//   proj.w [D,2D] proj.b [D]  hidden.w [H,D] hidden.b [H]  out.w [1,H] out.b [1]
// Weights are Xavier-initialised, biases start at zero.
nn::ParamStore init_actor(const ActorConfig& cfg, Rng& rng);
nn::ParamStore init_critic(const ActorConfig& actor, const CriticConfig& cfg, Rng& rng);

// Raw per-node inputs, customers first and the depot last.
nn::Tensor static_features(const ProblemInstance& instance);
// (d / Q, (l - d) / Q) per customer and (0, l / Q) for the depot.
nn::Tensor dynamic_features(const CvrpState& state);

// One actor evaluated on one tape. Static embeddings and every product that
// only depends on them are computed once in the constructor; `step` then
// runs one decoder cell plus the attention/pointer layers.
class ActorGraph {
 public:
  ActorGraph(nn::Tape& tape, const nn::ParamStore& params, const ActorConfig& cfg,
             const nn::Tensor& static_inputs);

  struct Recurrent {
    nn::Var h;
    nn::Var c;
  };
  struct Step {
    nn::Var probs;     // [1,M], masked
    nn::Var align;     // [1,M], unmasked attention weights
    nn::Var embedded;  // [M,2D], per-node (static, dynamic) pairs
    Recurrent next;
  };

  Recurrent initial_state();
  Recurrent constant_state(const nn::Tensor& h, const nn::Tensor& c);
  nn::Var static_embedding() const { return s_bar_; }
  nn::Var dynamic_embedding(const nn::Tensor& dyn);
  nn::Var decoder_input(int node);

  // `dropout_rng` null means inference: no dropout on the cell output.
  Step step(const Recurrent& rec, nn::Var input, const nn::Tensor& dyn, const std::vector<std::uint8_t>& mask,
            Rng* dropout_rng);

  int num_nodes() const { return m_; }

 private:
  nn::Tape& tape_;
  ActorConfig cfg_;
  int m_;
  int d_;
  nn::Var s_bar_;
  nn::Var w_dyn_, b_dyn_;
  nn::Var lstm_wx_, lstm_wh_, lstm_b_;
  nn::Var attn_v_, ptr_v_;
  nn::Var attn_h_, ptr_c_;
  nn::Var attn_static_, ptr_static_;  // S̄ W_sᵀ, per node
  nn::Var attn_dyn_, ptr_dyn_;        // W_d Wdyn, folded
  nn::Var attn_dyn_bias_, ptr_dyn_bias_;
};

enum class DecodeMode { greedy, sample, beam };

std::string to_string(DecodeMode m);
DecodeMode decode_mode_from_string(const std::string& s);

struct DecodeOptions {
  DecodeMode mode = DecodeMode::greedy;
  int beam_width = 1;
  bool split_mode = false;
  // Dropout is active only when inference is false.
  bool inference = true;
  bool record_trace = false;
};

struct StepTrace {
  int step = 0;
  std::vector<double> align;
  std::vector<double> probs;
  int chosen = -1;
};

struct RolloutResult {
  Solution solution;
  bool complete = false;
  std::vector<StepTrace> trace;
  // Sum of log-probabilities as a tape node; valid only when a recording
  // tape was passed (greedy and sample modes).
  nn::Var log_prob;
};

// Decodes one CVRP or TSP instance. `rng` drives sampling and dropout.
// With a recording `tape` the log-probability node is differentiable in
// the actor parameters; otherwise a private non-recording tape is used.
RolloutResult rollout(const ProblemInstance& instance, const nn::ParamStore& actor, const ActorConfig& cfg,
                      const DecodeOptions& opt, Rng& rng, nn::Tape* tape = nullptr);

// Probability vector and embedded inputs of the first decode step on the
// reset state, inference mode.
struct FirstStep {
  nn::Tensor probs;
  nn::Tensor embedded;
};
FirstStep actor_first_step(const ProblemInstance& instance, const nn::ParamStore& actor, const ActorConfig& cfg);

// Critic head on a tape: weighted sum p0 · X̄0, projection to D, ReLU layer,
// scalar output. `probs` and `embedded` enter as constants.
nn::Var critic_head(nn::Tape& tape, const nn::ParamStore& critic, const nn::Tensor& probs,
                    const nn::Tensor& embedded);

double critic_value(const ProblemInstance& instance, const nn::ParamStore& actor, const ActorConfig& acfg,
                    const nn::ParamStore& critic);

// Greedy decode with per-step attention and output distributions, steps
// [first, last] inclusive (last < 0 means until the end).
std::vector<StepTrace> export_attention(const ProblemInstance& instance, const nn::ParamStore& actor,
                                        const ActorConfig& cfg, int first = 0, int last = -1);
std::string step_trace_to_json(const StepTrace& t);

// ---- stochastic VRP ------------------------------------------------------

// Candidate set at a decision epoch: active customers (arrival order), the
// depot, and the vehicle's current position ("stay").
struct SvrpObservation {
  nn::Tensor static_inputs;  // [M,2]
  nn::Tensor dynamic;        // [M,3]: demand/Q, (load-demand)/Q, time in system/patience
  std::vector<SvrpAction> actions;
  std::vector<std::uint8_t> mask;
  int stay_node = 0;
};
SvrpObservation svrp_observe(const SvrpState& state);

// Policy agent carrying the decoder state between epochs. The recurrent
// state crosses epochs as a constant.
class SvrpAgent {
 public:
  SvrpAgent(const nn::ParamStore& actor, const ActorConfig& cfg);
  void reset();

  struct Decision {
    int node = 0;
    SvrpAction action;
    nn::Var log_prob;   // valid on a recording tape
    nn::Tensor probs;
    nn::Tensor embedded;
  };
  // Greedy when `sample` is false. `dropout_rng` null disables dropout.
  Decision decide(nn::Tape& tape, const SvrpObservation& obs, bool sample, Rng& rng, Rng* dropout_rng);

 private:
  const nn::ParamStore& actor_;
  ActorConfig cfg_;
  nn::Tensor h_, c_;
};

// Runs one full episode with the policy. Returns satisfied units.
int svrp_policy_episode(const SvrpConfig& cfg, const nn::ParamStore& actor, const ActorConfig& acfg, bool sample,
                        Rng& rng);

// Index of the largest entry, lowest index on ties.
int argmax(const nn::Tensor& p);
// Inverse-CDF draw over positive entries.
int sample_index(const nn::Tensor& p, Rng& rng);

}  // namespace vrprl
