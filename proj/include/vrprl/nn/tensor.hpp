#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace vrprl::nn {

// Dense row-major array of doubles, rank 1 or 2. Rank-1 tensors act as a
// single row wherever a matrix is expected.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor matrix(int rows, int cols, double fill = 0.0) { return Tensor({rows, cols}, fill); }
  static Tensor row(std::vector<double> values);
  static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int rows() const { return rank() == 2 ? shape_[0] : 1; }
  int cols() const { return rank() == 2 ? shape_[1] : (rank() == 1 ? shape_[0] : 0); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(int r, int c) { return values_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) + static_cast<std::size_t>(c)]; }
  double at(int r, int c) const { return values_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) + static_cast<std::size_t>(c)]; }

  bool same_shape(const Tensor& o) const { return rows() == o.rows() && cols() == o.cols(); }
  bool all_finite() const;
  double squared_norm() const;
  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<int> shape_;
  std::vector<double> values_;
};

// Named trainable arrays. Shapes are fixed once a name is added; `version`
// increases with every optimizer update.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  Tensor& get_mutable(const std::string& name);
  std::vector<std::string> names() const;
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;
  const std::map<std::string, Tensor>& all() const { return params_; }
  std::size_t parameter_count() const;

  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }
  void set_version(std::uint64_t v) { version_ = v; }

  friend bool operator==(const ParamStore& a, const ParamStore& b) { return a.params_ == b.params_; }

 private:
  std::map<std::string, Tensor> params_;
  std::uint64_t version_ = 0;
};

using Grads = std::map<std::string, Tensor>;

// Adds `scale * src` into `dst`, creating zero entries as needed.
void accumulate(Grads& dst, const Grads& src, double scale = 1.0);
void scale(Grads& g, double k);
double global_norm(const Grads& g);

}  // namespace vrprl::nn
