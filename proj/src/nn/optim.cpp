#include "vrprl/nn/optim.hpp"

#include <cmath>

#include "vrprl/errors.hpp"

namespace vrprl::nn {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "rmsprop"; }

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "rmsprop") return OptimizerKind::rmsprop;
  throw ConfigError("unknown optimizer '" + s + "'");
}

OptimizerState OptimizerState::adam(double lr) {
  OptimizerState o;
  o.kind = OptimizerKind::adam;
  o.lr = lr;
  return o;
}

OptimizerState OptimizerState::rmsprop(double lr) {
  OptimizerState o;
  o.kind = OptimizerKind::rmsprop;
  o.lr = lr;
  return o;
}

namespace {

void check_grads(const ParamStore& store, const Grads& grads) {
  for (const auto& [name, g] : grads) {
    if (!store.contains(name)) throw ShapeError("gradient for unknown parameter '" + name + "'");
    const Tensor& p = store.get(name);
    if (!p.same_shape(g) || p.size() != g.size())
      throw ShapeError("gradient shape " + g.shape_string() + " does not match parameter '" + name + "' " +
                       p.shape_string());
    if (!g.all_finite()) throw NumericHealthError("non-finite gradient for '" + name + "'");
  }
}

Tensor& moment(std::map<std::string, Tensor>& slots, const std::string& name, const Tensor& like) {
  auto it = slots.find(name);
  if (it == slots.end()) it = slots.emplace(name, Tensor(like.shape(), 0.0)).first;
  return it->second;
}

}  // namespace

void adam_step(ParamStore& store, const Grads& grads, OptimizerState& opt) {
  check_grads(store, grads);
  ++opt.step;
  const double t = static_cast<double>(opt.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (const auto& name : store.names()) {
    Tensor& p = store.get_mutable(name);
    Tensor& m = moment(opt.m, name, p);
    Tensor& v = moment(opt.v, name, p);
    auto it = grads.find(name);
    const Tensor* g = it == grads.end() ? nullptr : &it->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g ? (*g)[i] : 0.0;
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * gi;
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * gi * gi;
      p[i] -= opt.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + opt.eps);
    }
  }
  store.bump_version();
}

void rmsprop_step(ParamStore& store, const Grads& grads, OptimizerState& opt) {
  check_grads(store, grads);
  ++opt.step;
  for (const auto& name : store.names()) {
    Tensor& p = store.get_mutable(name);
    Tensor& v = moment(opt.v, name, p);
    auto it = grads.find(name);
    const Tensor* g = it == grads.end() ? nullptr : &it->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g ? (*g)[i] : 0.0;
      v[i] = opt.decay * v[i] + (1.0 - opt.decay) * gi * gi;
      p[i] -= opt.lr * gi / (std::sqrt(v[i]) + opt.eps);
    }
  }
  store.bump_version();
}

void optimizer_step(ParamStore& store, const Grads& grads, OptimizerState& opt) {
  if (opt.kind == OptimizerKind::adam)
    adam_step(store, grads, opt);
  else
    rmsprop_step(store, grads, opt);
}

double clip_global_norm(Grads& grads, double threshold) {
  const double norm = global_norm(grads);
  if (norm > threshold) scale(grads, threshold / norm);
  return norm;
}

Tensor xavier_init(const std::vector<int>& shape, Rng& rng) {
  double fan_in = 0.0, fan_out = 0.0;
  if (shape.size() == 1) {
    fan_in = fan_out = shape[0];
  } else if (shape.size() == 2) {
    fan_in = shape[1];
    fan_out = shape[0];
  } else {
    throw ShapeError("xavier_init expects a 1-D or 2-D shape");
  }
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor t(shape, 0.0);
  for (double& x : t.values()) x = rng.uniform(-bound, bound);
  return t;
}

}  // namespace vrprl::nn
