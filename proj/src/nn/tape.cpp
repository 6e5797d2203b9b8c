#include "vrprl/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "vrprl/errors.hpp"

namespace vrprl::nn {

namespace {

using RMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RMat>;
using Map = Eigen::Map<RMat>;

MapC view(const Tensor& t) { return MapC(t.data(), t.rows(), t.cols()); }
Map view(Tensor& t) { return Map(t.data(), t.rows(), t.cols()); }

Tape& same_tape(Var a, Var b) {
  if (a.tape != b.tape || !a.tape) throw ContractViolation("operands live on different tapes");
  return *a.tape;
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " + b.shape_string());
}

Tensor like(const Tensor& t, double fill = 0.0) { return Tensor::matrix(t.rows(), t.cols(), fill); }

// Sum independent of the order of `v`; sorts in place.
double sorted_sum(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

const Tensor& Var::value() const { return tape->value(*this); }

double Var::item() const {
  const auto& v = value();
  if (v.size() != 1) throw ShapeError("item() on a non-scalar " + v.shape_string());
  return v[0];
}

Var Tape::push(Tensor value, bool requires_grad, BackwardFn backward, const char* op) {
  if (!value.all_finite())
    throw NumericHealthError(std::string("non-finite output from ") + op);
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_ && requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor value) { return push(std::move(value), false, nullptr, "constant"); }

Var Tape::input(Tensor value) { return push(std::move(value), true, nullptr, "input"); }

Var Tape::param(const ParamStore& store, const std::string& name) {
  if (auto it = param_ids_.find(name); it != param_ids_.end()) return {this, it->second};
  Node n;
  n.ref = &store.get(name);
  n.requires_grad = record_;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_ids_.emplace(name, id);
  return {this, id};
}

void Tape::freeze_params() {
  for (const auto& [name, id] : param_ids_) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.ref) {
      n.value = *n.ref;
      n.ref = nullptr;
    }
  }
}

const Tensor& Tape::value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.ref ? *n.ref : n.value;
}

const Tensor& Tape::value(Var v) const { return value(v.id); }
const Tensor& Tape::grad(Var v) const { return grad(v.id); }

Tensor& Tape::grad_buffer(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad = like(n.ref ? *n.ref : n.value);
  return n.grad;
}

void Tape::backward(Var root, double seed) {
  if (root.tape != this) throw ContractViolation("backward on a foreign node");
  if (value(root).size() != 1) throw ShapeError("backward needs a scalar root");
  if (!requires_grad(root.id)) return;
  grad_buffer(root.id)[0] += seed;
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.backward && !n.grad.empty()) n.backward(*this, id);
  }
}

Grads Tape::param_grads() const {
  Grads g;
  add_param_grads(g);
  return g;
}

void Tape::add_param_grads(Grads& into, double k) const {
  for (const auto& [name, id] : param_ids_) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) continue;
    auto it = into.find(name);
    if (it == into.end()) it = into.emplace(name, Tensor(value(id).shape(), 0.0)).first;
    double* d = it->second.data();
    const double* s = n.grad.data();
    for (std::size_t i = 0; i < n.grad.size(); ++i) d[i] += k * s[i];
  }
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows()) shape_fail("matmul", A, B);
  Tensor C = Tensor::matrix(A.rows(), B.cols());
  view(C).noalias() = view(A) * view(B);
  const int ia = a.id, ib = b.id;
  return t.push(std::move(C), t.requires_grad(a) || t.requires_grad(b),
                [ia, ib](Tape& tp, int self) {
                  const auto dC = view(tp.grad(self));
                  if (tp.requires_grad(ia)) view(tp.grad_buffer(ia)).noalias() += dC * view(tp.value(ib)).transpose();
                  if (tp.requires_grad(ib)) view(tp.grad_buffer(ib)).noalias() += view(tp.value(ia)).transpose() * dC;
                },
                "matmul");
}

Var matmul_nt(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.cols()) shape_fail("matmul_nt", A, B);
  Tensor C = Tensor::matrix(A.rows(), B.rows());
  view(C).noalias() = view(A) * view(B).transpose();
  const int ia = a.id, ib = b.id;
  return t.push(std::move(C), t.requires_grad(a) || t.requires_grad(b),
                [ia, ib](Tape& tp, int self) {
                  const auto dC = view(tp.grad(self));
                  if (tp.requires_grad(ia)) view(tp.grad_buffer(ia)).noalias() += dC * view(tp.value(ib));
                  if (tp.requires_grad(ib)) view(tp.grad_buffer(ib)).noalias() += dC.transpose() * view(tp.value(ia));
                },
                "matmul_nt");
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (!A.same_shape(B)) shape_fail("add", A, B);
  Tensor C = like(A);
  view(C) = view(A) + view(B);
  const int ia = a.id, ib = b.id;
  return t.push(std::move(C), t.requires_grad(a) || t.requires_grad(b),
                [ia, ib](Tape& tp, int self) {
                  const auto dC = view(tp.grad(self));
                  if (tp.requires_grad(ia)) view(tp.grad_buffer(ia)) += dC;
                  if (tp.requires_grad(ib)) view(tp.grad_buffer(ib)) += dC;
                },
                "add");
}

Var add_row(Var a, Var row) {
  Tape& t = same_tape(a, row);
  const Tensor& A = a.value();
  const Tensor& R = row.value();
  if (R.rows() != 1 || R.cols() != A.cols()) shape_fail("add_row", A, R);
  Tensor C = like(A);
  view(C) = view(A).rowwise() + view(R).row(0);
  const int ia = a.id, ir = row.id;
  return t.push(std::move(C), t.requires_grad(a) || t.requires_grad(row),
                [ia, ir](Tape& tp, int self) {
                  const auto dC = view(tp.grad(self));
                  if (tp.requires_grad(ia)) view(tp.grad_buffer(ia)) += dC;
                  if (tp.requires_grad(ir)) view(tp.grad_buffer(ir)).row(0) += dC.colwise().sum();
                },
                "add_row");
}

Var scale(Var a, double k) {
  Tape& t = *a.tape;
  Tensor C = like(a.value());
  view(C) = view(a.value()) * k;
  const int ia = a.id;
  return t.push(std::move(C), t.requires_grad(a),
                [ia, k](Tape& tp, int self) { view(tp.grad_buffer(ia)) += view(tp.grad(self)) * k; },
                "scale");
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (!A.same_shape(B)) shape_fail("mul", A, B);
  Tensor C = like(A);
  view(C) = view(A).cwiseProduct(view(B));
  const int ia = a.id, ib = b.id;
  return t.push(std::move(C), t.requires_grad(a) || t.requires_grad(b),
                [ia, ib](Tape& tp, int self) {
                  const auto dC = view(tp.grad(self));
                  if (tp.requires_grad(ia)) view(tp.grad_buffer(ia)) += dC.cwiseProduct(view(tp.value(ib)));
                  if (tp.requires_grad(ib)) view(tp.grad_buffer(ib)) += dC.cwiseProduct(view(tp.value(ia)));
                },
                "mul");
}

Var concat_cols(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rows() != B.rows()) shape_fail("concat_cols", A, B);
  const int ca = A.cols(), cb = B.cols();
  Tensor C = Tensor::matrix(A.rows(), ca + cb);
  view(C).leftCols(ca) = view(A);
  view(C).rightCols(cb) = view(B);
  const int ia = a.id, ib = b.id;
  return t.push(std::move(C), t.requires_grad(a) || t.requires_grad(b),
                [ia, ib, ca, cb](Tape& tp, int self) {
                  const auto dC = view(tp.grad(self));
                  if (tp.requires_grad(ia)) view(tp.grad_buffer(ia)) += dC.leftCols(ca);
                  if (tp.requires_grad(ib)) view(tp.grad_buffer(ib)) += dC.rightCols(cb);
                },
                "concat_cols");
}

Var slice_cols(Var a, int begin, int end) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  if (begin < 0 || end > A.cols() || begin >= end)
    throw ShapeError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) + ") of " + A.shape_string());
  const int w = end - begin;
  Tensor C = Tensor::matrix(A.rows(), w);
  view(C) = view(A).middleCols(begin, w);
  const int ia = a.id;
  return t.push(std::move(C), t.requires_grad(a),
                [ia, begin, w](Tape& tp, int self) {
                  view(tp.grad_buffer(ia)).middleCols(begin, w) += view(tp.grad(self));
                },
                "slice_cols");
}

Var select_row(Var a, int r) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  if (r < 0 || r >= A.rows()) throw ShapeError("select_row " + std::to_string(r) + " of " + A.shape_string());
  Tensor C = Tensor::matrix(1, A.cols());
  view(C) = view(A).row(r);
  const int ia = a.id;
  return t.push(std::move(C), t.requires_grad(a),
                [ia, r](Tape& tp, int self) { view(tp.grad_buffer(ia)).row(r) += view(tp.grad(self)).row(0); },
                "select_row");
}

Var tanh(Var a) {
  Tape& t = *a.tape;
  Tensor C = like(a.value());
  view(C) = view(a.value()).array().tanh().matrix();
  const int ia = a.id;
  return t.push(std::move(C), t.requires_grad(a),
                [ia](Tape& tp, int self) {
                  const auto y = view(tp.value(self)).array();
                  view(tp.grad_buffer(ia)).array() += view(tp.grad(self)).array() * (1.0 - y * y);
                },
                "tanh");
}

Var sigmoid(Var a) {
  Tape& t = *a.tape;
  Tensor C = like(a.value());
  view(C) = (1.0 / (1.0 + (-view(a.value()).array()).exp())).matrix();
  const int ia = a.id;
  return t.push(std::move(C), t.requires_grad(a),
                [ia](Tape& tp, int self) {
                  const auto y = view(tp.value(self)).array();
                  view(tp.grad_buffer(ia)).array() += view(tp.grad(self)).array() * y * (1.0 - y);
                },
                "sigmoid");
}

Var relu(Var a) {
  Tape& t = *a.tape;
  Tensor C = like(a.value());
  view(C) = view(a.value()).cwiseMax(0.0);
  const int ia = a.id;
  return t.push(std::move(C), t.requires_grad(a),
                [ia](Tape& tp, int self) {
                  const auto x = view(tp.value(ia)).array();
                  view(tp.grad_buffer(ia)).array() += (x > 0.0).select(view(tp.grad(self)).array(), 0.0);
                },
                "relu");
}

Var reduce_sum(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  const double s = std::accumulate(A.values().begin(), A.values().end(), 0.0);
  const int ia = a.id;
  return t.push(Tensor::scalar(s), t.requires_grad(a),
                [ia](Tape& tp, int self) {
                  const double g = tp.grad(self)[0];
                  for (double& v : tp.grad_buffer(ia).values()) v += g;
                },
                "reduce_sum");
}

Var masked_softmax(Var logits, const std::vector<std::uint8_t>& mask) {
  Tape& t = *logits.tape;
  const Tensor& X = logits.value();
  const int n = X.cols();
  if (X.rows() != 1) throw ShapeError("masked_softmax expects one row, got " + X.shape_string());
  if (static_cast<int>(mask.size()) != n)
    throw ShapeError("mask length " + std::to_string(mask.size()) + " vs " + std::to_string(n) + " logits");
  if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }))
    throw ContractViolation("masked_softmax with every entry masked");

  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    if (mask[static_cast<std::size_t>(i)]) mx = std::max(mx, X[static_cast<std::size_t>(i)]);
  Tensor P = like(X);
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    P[k] = mask[k] ? std::exp(X[k] - mx) : 0.0;
  }
  std::vector<double> terms = P.values();
  const double z = sorted_sum(terms);
  for (double& p : P.values()) p /= z;

  const int ix = logits.id;
  return t.push(std::move(P), t.requires_grad(logits),
                [ix, mask](Tape& tp, int self) {
                  const Tensor& p = tp.value(self);
                  const Tensor& g = tp.grad(self);
                  double dot = 0.0;
                  for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * g[i];
                  Tensor& gx = tp.grad_buffer(ix);
                  for (std::size_t i = 0; i < p.size(); ++i)
                    if (mask[i]) gx[i] += p[i] * (g[i] - dot);
                },
                "masked_softmax");
}

Var pool_rows(Var w, Var a) {
  Tape& t = same_tape(w, a);
  const Tensor& W = w.value();
  const Tensor& A = a.value();
  if (W.rows() != 1 || W.cols() != A.rows()) shape_fail("pool_rows", W, A);
  const int m = A.rows(), n = A.cols();
  Tensor C = Tensor::matrix(1, n);
  std::vector<double> terms(static_cast<std::size_t>(m));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < m; ++i) terms[static_cast<std::size_t>(i)] = W[static_cast<std::size_t>(i)] * A.at(i, j);
    C[static_cast<std::size_t>(j)] = sorted_sum(terms);
  }
  const int iw = w.id, ia = a.id;
  return t.push(std::move(C), t.requires_grad(w) || t.requires_grad(a),
                [iw, ia](Tape& tp, int self) {
                  const auto dC = view(tp.grad(self));
                  if (tp.requires_grad(iw)) view(tp.grad_buffer(iw)).noalias() += dC * view(tp.value(ia)).transpose();
                  if (tp.requires_grad(ia)) view(tp.grad_buffer(ia)).noalias() += view(tp.value(iw)).transpose() * dC;
                },
                "pool_rows");
}

Var softmax(Var logits) {
  return masked_softmax(logits, std::vector<std::uint8_t>(static_cast<std::size_t>(logits.cols()), 1));
}

Var log_at(Var p, int index) {
  Tape& t = *p.tape;
  const Tensor& P = p.value();
  if (P.rows() != 1 || index < 0 || index >= P.cols()) throw ShapeError("log_at index out of range");
  const double v = P[static_cast<std::size_t>(index)];
  if (!(v > 0.0)) throw NumericHealthError("log of a zero probability");
  const int ip = p.id;
  return t.push(Tensor::scalar(std::log(v)), t.requires_grad(p),
                [ip, index, v](Tape& tp, int self) {
                  tp.grad_buffer(ip)[static_cast<std::size_t>(index)] += tp.grad(self)[0] / v;
                },
                "log_at");
}

Var dropout(Var a, double p, Rng& rng) {
  if (p <= 0.0) return a;
  if (p >= 1.0) throw ConfigError("dropout probability must be below 1");
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  std::vector<double> keep(A.size());
  const double s = 1.0 / (1.0 - p);
  for (double& k : keep) k = rng.uniform() < p ? 0.0 : s;
  Tensor C = like(A);
  for (std::size_t i = 0; i < A.size(); ++i) C[i] = A[i] * keep[i];
  const int ia = a.id;
  return t.push(std::move(C), t.requires_grad(a),
                [ia, keep = std::move(keep)](Tape& tp, int self) {
                  Tensor& g = tp.grad_buffer(ia);
                  const Tensor& d = tp.grad(self);
                  for (std::size_t i = 0; i < keep.size(); ++i) g[i] += d[i] * keep[i];
                },
                "dropout");
}

Var embedding_affine(Var x, Var weight, Var bias) { return add_row(matmul_nt(x, weight), bias); }

LstmOut lstm_cell(Var x, Var h, Var c, Var w_x, Var w_h, Var b) {
  const int d = h.cols();
  if (w_x.rows() != 4 * d || w_h.rows() != 4 * d || w_h.cols() != d || b.cols() != 4 * d || c.cols() != d)
    throw ShapeError("lstm_cell parameter shapes do not match state size " + std::to_string(d));
  Var gates = add_row(add(matmul_nt(x, w_x), matmul_nt(h, w_h)), b);
  Var i = sigmoid(slice_cols(gates, 0, d));
  Var f = sigmoid(slice_cols(gates, d, 2 * d));
  Var g = tanh(slice_cols(gates, 2 * d, 3 * d));
  Var o = sigmoid(slice_cols(gates, 3 * d, 4 * d));
  Var c_next = add(mul(f, c), mul(i, g));
  Var h_next = mul(o, tanh(c_next));
  return {h_next, c_next};
}

double grad_check(const std::function<double(const ParamStore&)>& f, const ParamStore& params,
                  const Grads& analytic, const GradCheckOptions& opt) {
  ParamStore probe = params;
  Rng rng(opt.seed);
  double worst = 0.0;
  for (const auto& [name, g] : analytic) {
    Tensor& w = probe.get_mutable(name);
    if (!w.same_shape(g)) throw ShapeError("grad_check: analytic gradient shape mismatch for '" + name + "'");
    std::vector<std::size_t> coords(w.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > opt.max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opt.max_coords);
    }
    for (std::size_t k : coords) {
      const double orig = w[k];
      w[k] = orig + opt.epsilon;
      const double fp = f(probe);
      w[k] = orig - opt.epsilon;
      const double fm = f(probe);
      w[k] = orig;
      const double num = (fp - fm) / (2.0 * opt.epsilon);
      const double a = g[k];
      const double denom = std::max({std::abs(a), std::abs(num), opt.floor});
      worst = std::max(worst, std::abs(a - num) / denom);
    }
  }
  return worst;
}

}  // namespace vrprl::nn
