#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "vrprl/nn/tensor.hpp"
#include "vrprl/rng.hpp"

namespace vrprl::nn {

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid while its tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor& value() const;
  int rows() const { return value().rows(); }
  int cols() const { return value().cols(); }
  double item() const;
};

// Reverse-mode gradient tape. One tape belongs to one rollout; it is not
// shared between threads. With recording off the tape only evaluates.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Tensor value);
  // Leaf that receives a gradient; used for inputs under test.
  Var input(Tensor value);
  // Leaf bound to a stored parameter (by reference, so the store must
  // outlive the tape). Repeated calls return the same node.
  Var param(const ParamStore& store, const std::string& name);

  // Copies every referenced parameter into the tape, so the store may be
  // modified before this tape's backward pass.
  void freeze_params();

  const Tensor& value(Var v) const;
  // Empty tensor when no gradient reached the node.
  const Tensor& grad(Var v) const;

  // Seeds d(root)/d(root) = seed on a 1x1 root and runs the tape backwards.
  void backward(Var root, double seed = 1.0);

  Grads param_grads() const;
  void add_param_grads(Grads& into, double k = 1.0) const;

  std::size_t size() const { return nodes_.size(); }

  // Op plumbing.
  Var push(Tensor value, bool requires_grad, BackwardFn backward, const char* op);
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  bool requires_grad(Var v) const { return requires_grad(v.id); }
  const Tensor& value(int id) const;
  const Tensor& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  Tensor& grad_buffer(int id);

 private:
  struct Node {
    Tensor value;
    const Tensor* ref = nullptr;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;
  std::map<std::string, int> param_ids_;
  bool record_;
};

// ---- primitive ops -------------------------------------------------------
// All take and return rank-2 views (rank-1 tensors behave as 1 x n).

Var matmul(Var a, Var b);     // a[m,k] b[k,n]
Var matmul_nt(Var a, Var b);  // a[m,k] b[n,k]^T
Var add(Var a, Var b);
Var add_row(Var a, Var row);  // row[1,n] broadcast over a[m,n]
Var scale(Var a, double k);
Var mul(Var a, Var b);        // elementwise
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, int begin, int end);
Var select_row(Var a, int r);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var reduce_sum(Var a);
// w[1,m] a[m,n], like matmul, but each column sum is taken in ascending
// order of its terms so the result does not depend on the row order.
Var pool_rows(Var w, Var a);
// Softmax over a single row; the normaliser is summed in sorted order, so
// permuting the logits permutes the output bit for bit. Masked entries get probability exactly 0 and
// gradient exactly 0; an all-masked row is a contract violation.
Var masked_softmax(Var logits, const std::vector<std::uint8_t>& mask);
Var softmax(Var logits);
// log(p[0, index]) as a 1x1 node.
Var log_at(Var p, int index);
// Inverted dropout: zeroes entries with probability p, scales survivors by
// 1/(1-p). p = 0 returns `a` unchanged.
Var dropout(Var a, double p, Rng& rng);
// Shared per-row affine map x W^T + b; the kernel-size-1 convolution.
Var embedding_affine(Var x, Var weight, Var bias);

// Standard LSTM cell, gate blocks ordered (input, forget, candidate, output)
// in w_x[4D, in], w_h[4D, D], b[1, 4D].
struct LstmOut {
  Var h;
  Var c;
};
LstmOut lstm_cell(Var x, Var h, Var c, Var w_x, Var w_h, Var b);

// Central-difference check of an analytic gradient of f at the parameters
// named in `analytic`. Returns the largest |a - n| / max(|a|, |n|, floor).
// Tensors with more than `max_coords` entries are checked on a random
// subset of that many coordinates.
struct GradCheckOptions {
  double epsilon = 1e-5;
  double floor = 1e-6;
  std::size_t max_coords = 200;
  std::uint64_t seed = 0;
};
double grad_check(const std::function<double(const ParamStore&)>& f, const ParamStore& params,
                  const Grads& analytic, const GradCheckOptions& opt = {});

}  // namespace vrprl::nn
