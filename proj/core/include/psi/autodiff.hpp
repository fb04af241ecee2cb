#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices of doubles.
//
// A Tensor is a cheap handle to a node on an implicit tape: every op
// allocates a node holding its value and a closure that pushes the node's
// gradient back into its parents. backward() walks the nodes reachable from
// a scalar loss in reverse topological order. Leaf tensors created with
// Tensor::parameter() keep their gradients across backward() calls until
// zero_grad(), which is how gradient accumulation works.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "psi/random.hpp"

namespace psi::ad {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix row(std::span<const double> values);
  static Matrix column(std::span<const double> values);
  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const double& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<const double> row_span(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::string shape_string(std::size_t rows, std::size_t cols);

struct Node {
  Matrix value;
  std::vector<double> grad;  // empty until a gradient reaches this node
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;
  bool is_leaf = true;
  const char* op = "leaf";

  std::span<double> ensure_grad();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(Matrix value);
  static Tensor parameter(Matrix value);
  static Tensor scalar(double value) { return constant(Matrix(1, 1, value)); }

  bool defined() const noexcept { return node_ != nullptr; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  const Matrix& value() const { return node_->value; }
  /// Mutable access for optimizers and finite differences. Do not call
  /// while a tape built from this tensor is still going to be replayed.
  Matrix& mutable_value() { return node_->value; }
  double item() const;

  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  bool has_grad() const noexcept { return node_ && !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad.clear(); }

  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Populates gradients of every parameter reachable from `loss`. Gradients
/// add onto whatever the leaves already hold. Throws std::invalid_argument
/// for a non-scalar loss.
void backward(const Tensor& loss);

// ---- forward ops --------------------------------------------------------
// Shape mismatches throw std::invalid_argument naming both shapes.

Tensor matmul(const Tensor& a, const Tensor& b);
/// a + b; b may also be a 1 x cols row broadcast over a's rows.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
/// log(1 + e^x), evaluated without overflow.
Tensor softplus(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);
/// rows x 1 column of per-row log-sum-exp.
Tensor logsumexp_rows(const Tensor& a);
/// 1 x cols mean over rows. Throws for zero rows.
Tensor mean_rows(const Tensor& a);
/// 1 x 1 sum of every entry (zero for an empty tensor).
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);
Tensor transpose(const Tensor& a);
/// Rows scaled to unit L2 norm; an all-zero row stays zero with zero gradient.
Tensor normalize_rows(const Tensor& a);
/// Inverted dropout: zeroes entries with probability p and rescales the rest
/// by 1/(1-p). Returns `a` itself when inactive or p == 0.
Tensor dropout(const Tensor& a, double p, Rng& rng, bool active);
/// Same value, no gradient flows back through it.
Tensor detach(const Tensor& a);
/// 1 x 1 entry (r, c).
Tensor pick(const Tensor& a, std::size_t r, std::size_t c);

/// Sparse weighted aggregation: out[v] = sum_j weight_j * in[source_j] over
/// the entries of row v. Used for mean-neighbor message passing.
struct Aggregation {
  std::size_t num_targets = 0;
  std::size_t num_sources = 0;
  std::vector<std::size_t> offsets;  // num_targets + 1
  std::vector<std::uint32_t> sources;
  std::vector<double> weights;
};
Tensor aggregate(const Tensor& a, std::shared_ptr<const Aggregation> agg);

}  // namespace psi::ad
