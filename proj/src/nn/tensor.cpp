#include "vrprl/nn/tensor.hpp"

#include <cmath>
#include <numeric>

#include "vrprl/errors.hpp"

namespace vrprl::nn {

namespace {

std::size_t count(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 2) throw ShapeError("tensors have rank 1 or 2");
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)), values_(count(shape_), fill) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != count(shape_))
    throw ShapeError("value count " + std::to_string(values_.size()) + " does not match shape " + shape_string());
}

Tensor Tensor::row(std::vector<double> values) {
  const int n = static_cast<int>(values.size());
  return Tensor({1, n}, std::move(values));
}

bool Tensor::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::squared_norm() const {
  return std::inner_product(values_.begin(), values_.end(), values_.begin(), 0.0);
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) s += (i ? "," : "") + std::to_string(shape_[i]);
  return s + "]";
}

Tensor& ParamStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw ConfigError("parameter '" + name + "' already exists");
  return params_.emplace(name, std::move(value)).first->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("no parameter named '" + name + "'");
  return it->second;
}

Tensor& ParamStore::get_mutable(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("no parameter named '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : params_) out.push_back(k);
  return out;
}

std::vector<std::string> ParamStore::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : params_)
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  return out;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [k, v] : params_) n += v.size();
  return n;
}

void accumulate(Grads& dst, const Grads& src, double k) {
  for (const auto& [name, g] : src) {
    auto it = dst.find(name);
    if (it == dst.end()) it = dst.emplace(name, Tensor(g.shape(), 0.0)).first;
    if (!it->second.same_shape(g)) throw ShapeError("gradient shape mismatch for '" + name + "'");
    double* d = it->second.data();
    const double* s = g.data();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += k * s[i];
  }
}

void scale(Grads& g, double k) {
  for (auto& [name, t] : g)
    for (double& v : t.values()) v *= k;
}

double global_norm(const Grads& g) {
  double s = 0.0;
  for (const auto& [name, t] : g) s += t.squared_norm();
  return std::sqrt(s);
}

}  // namespace vrprl::nn
