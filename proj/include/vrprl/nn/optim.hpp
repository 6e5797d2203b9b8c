#pragma once

#include <string>
#include <vector>

#include "vrprl/nn/tensor.hpp"
#include "vrprl/rng.hpp"

namespace vrprl::nn {

enum class OptimizerKind { adam, rmsprop };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(const std::string& s);

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-4;
  double beta1 = 0.9;    // adam
  double beta2 = 0.999;  // adam
  double decay = 0.9;    // rmsprop
  double eps = 1e-8;
  std::uint64_t step = 0;
  // Adam: m = first moment, v = second moment. RMSProp: v = running mean
  // of squared gradients, m unused.
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;

  static OptimizerState adam(double lr = 1e-4);
  static OptimizerState rmsprop(double lr = 1e-5);

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

// Both steps update every parameter in `store`; a parameter absent from
// `grads` is treated as having a zero gradient. Gradients for unknown names
// or of the wrong shape throw ShapeError before anything is modified.
void adam_step(ParamStore& store, const Grads& grads, OptimizerState& opt);
void rmsprop_step(ParamStore& store, const Grads& grads, OptimizerState& opt);
void optimizer_step(ParamStore& store, const Grads& grads, OptimizerState& opt);

// Rescales `grads` in place when their global norm exceeds `threshold`.
// Returns the norm before clipping.
double clip_global_norm(Grads& grads, double threshold = 2.0);

// Uniform in +-sqrt(6 / (fan_in + fan_out)). For [out, in] the fans are
// (in, out); a 1-D shape [n] uses n for both.
Tensor xavier_init(const std::vector<int>& shape, Rng& rng);

}  // namespace vrprl::nn
