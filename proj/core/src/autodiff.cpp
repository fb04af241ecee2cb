#include "psi/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace psi::ad {

namespace {

using NodePtr = std::shared_ptr<Node>;

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              shape_string(a.rows(), a.cols()) + " and " +
                              shape_string(b.rows(), b.cols()));
}

Tensor make_result(Matrix value, std::vector<NodePtr> parents, const char* op,
                   std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  node->is_leaf = false;
  for (const auto& p : parents) node->requires_grad = node->requires_grad || p->requires_grad;
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

double stable_softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Elementwise unary op with derivative expressed from (input, output).
template <class F, class D>
Tensor unary(const Tensor& a, const char* op, F f, D dfdx) {
  const auto& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  return make_result(std::move(out), {a.node()}, op, [dfdx](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * dfdx(p.value[i], self.value[i]);
  });
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("matrix data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_string(rows_, cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw std::invalid_argument("ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::row(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string shape_string(std::size_t rows, std::size_t cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

std::span<double> Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = "constant";
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->op = "parameter";
  return Tensor(std::move(node));
}

double Tensor::item() const {
  if (node_->value.rows() != 1 || node_->value.cols() != 1) {
    throw std::invalid_argument("item() on non-scalar tensor " +
                                shape_string(node_->value.rows(), node_->value.cols()));
  }
  return node_->value[0];
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1) {
    throw std::invalid_argument("backward() needs a scalar (1x1) loss, got " +
                                (loss.defined() ? shape_string(loss.rows(), loss.cols())
                                                : std::string("undefined")));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS; only nodes that carry gradients are visited.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Intermediate gradients from an earlier backward() over a shared subgraph
  // must not leak into this pass.
  for (auto* node : order) {
    if (!node->is_leaf) node->grad.clear();
  }
  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->is_leaf || node->grad.empty() || !node->backward_fn) continue;
    node->backward_fn(*node);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
  Matrix out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = &out(i, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av(i, p);
      if (aip == 0.0) continue;
      const double* brow = &bv(p, 0);
      for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
    }
  }
  return make_result(std::move(out), {a.node(), b.node()}, "matmul", [n, k, m](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const double* g = self.grad.data();
    if (pa.requires_grad) {
      auto ga = pa.ensure_grad();
      // dA = dC * B^T
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = &pb.value(p, 0);
          const double* grow = g + i * m;
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (pb.requires_grad) {
      auto gb = pb.ensure_grad();
      // dB = A^T * dC
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = g + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = pa.value(i, p);
          if (aip == 0.0) continue;
          double* gbrow = gb.data() + p * m;
          for (std::size_t j = 0; j < m; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  });
}

namespace {

// a (+/-) b with optional row broadcast of b.
Tensor add_impl(const Tensor& a, const Tensor& b, double sign, const char* op) {
  const auto& av = a.value();
  const auto& bv = b.value();
  const bool broadcast = bv.rows() == 1 && av.rows() != 1 && bv.cols() == av.cols();
  if (!broadcast && (av.rows() != bv.rows() || av.cols() != bv.cols())) shape_error(op, av, bv);
  Matrix out = av;
  const std::size_t cols = av.cols();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += sign * (broadcast ? bv[i % cols] : bv[i]);
  }
  return make_result(std::move(out), {a.node(), b.node()}, op, [broadcast, cols, sign](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto ga = pa.ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto gb = pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        gb[broadcast ? i % cols : i] += sign * self.grad[i];
      }
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_impl(a, b, 1.0, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_impl(a, b, -1.0, "sub"); }

Tensor mul(const Tensor& a, const Tensor& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("mul", av, bv);
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(std::move(out), {a.node(), b.node()}, "mul", [](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto ga = pa.ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto gb = pb.ensure_grad();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += self.grad[i] * pa.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, "scale", [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, "sigmoid", stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor log(const Tensor& a) {
  return unary(
      a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor exp(const Tensor& a) {
  return unary(
      a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor softplus(const Tensor& a) {
  return unary(a, "softplus", stable_softplus, [](double x, double) { return stable_sigmoid(x); });
}

Tensor softmax_rows(const Tensor& a) {
  const auto& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, av(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (out(r, c) = std::exp(av(r, c) - mx));
    for (std::size_t c = 0; c < cols; ++c) out(r, c) /= z;
  }
  return make_result(std::move(out), {a.node()}, "softmax_rows", [rows, cols](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto g = p.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += self.grad[r * cols + c] * self.value(r, c);
      for (std::size_t c = 0; c < cols; ++c) {
        g[r * cols + c] += self.value(r, c) * (self.grad[r * cols + c] - dot);
      }
    }
  });
}

Tensor logsumexp_rows(const Tensor& a) {
  const auto& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  if (cols == 0) throw std::invalid_argument("logsumexp_rows: zero columns");
  Matrix out(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, av(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(av(r, c) - mx);
    out(r, 0) = mx + std::log(z);
  }
  return make_result(std::move(out), {a.node()}, "logsumexp_rows", [rows, cols](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto g = p.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        g[r * cols + c] += self.grad[r] * std::exp(p.value(r, c) - self.value(r, 0));
      }
    }
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  const auto& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, av(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(av(r, c) - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = av(r, c) - lse;
  }
  return make_result(std::move(out), {a.node()}, "log_softmax_rows", [rows, cols](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto g = p.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      double gsum = 0.0;
      for (std::size_t c = 0; c < cols; ++c) gsum += self.grad[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        g[r * cols + c] += self.grad[r * cols + c] - std::exp(self.value(r, c)) * gsum;
      }
    }
  });
}

Tensor mean_rows(const Tensor& a) {
  const auto& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  if (rows == 0) throw std::invalid_argument("mean_rows: tensor has zero rows");
  Matrix out(1, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c] += av(r, c);
  }
  for (std::size_t c = 0; c < cols; ++c) out[c] /= static_cast<double>(rows);
  return make_result(std::move(out), {a.node()}, "mean_rows", [rows, cols](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto g = p.ensure_grad();
    const double inv = 1.0 / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[c] * inv;
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  return make_result(Matrix(1, 1, s), {a.node()}, "sum", [](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto g = p.ensure_grad();
    for (auto& x : g) x += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.value().empty()) throw std::invalid_argument("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rows() != bv.rows()) shape_error("concat_cols", av, bv);
  const std::size_t rows = av.rows(), ca = av.cols(), cb = bv.cols();
  Matrix out(rows, ca + cb);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(&av(r, 0), ca, &out(r, 0));
    if (cb) std::copy_n(&bv(r, 0), cb, &out(r, ca));
  }
  return make_result(std::move(out), {a.node(), b.node()}, "concat_cols", [rows, ca, cb](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const std::size_t w = ca + cb;
    if (pa.requires_grad) {
      auto g = pa.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < ca; ++c) g[r * ca + c] += self.grad[r * w + c];
    }
    if (pb.requires_grad) {
      auto g = pb.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cb; ++c) g[r * cb + c] += self.grad[r * w + ca + c];
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  std::vector<NodePtr> parents;
  for (const auto& p : parts) {
    if (p.cols() != cols) shape_error("concat_rows", parts[0].value(), p.value());
    rows += p.rows();
    parents.push_back(p.node());
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + offset);
    offset += p.value().size();
  }
  return make_result(std::move(out), std::move(parents), "concat_rows", [](Node& self) {
    std::size_t off = 0;
    for (auto& pp : self.parents) {
      const auto n = pp->value.size();
      if (pp->requires_grad) {
        auto g = pp->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[off + i];
      }
      off += n;
    }
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
  const auto& av = a.value();
  const std::size_t cols = av.cols();
  Matrix out(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows()) {
      throw std::invalid_argument("gather_rows: index " + std::to_string(rows[i]) +
                                  " out of range for " + shape_string(av.rows(), cols));
    }
    if (cols) std::copy_n(&av(rows[i], 0), cols, &out(i, 0));
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result(std::move(out), {a.node()}, "gather_rows",
                     [idx = std::move(idx), cols](Node& self) {
                       auto& p = *self.parents[0];
                       if (!p.requires_grad) return;
                       auto g = p.ensure_grad();
                       for (std::size_t i = 0; i < idx.size(); ++i)
                         for (std::size_t c = 0; c < cols; ++c)
                           g[idx[i] * cols + c] += self.grad[i * cols + c];
                     });
}

Tensor transpose(const Tensor& a) {
  const auto& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Matrix out(cols, rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out(c, r) = av(r, c);
  return make_result(std::move(out), {a.node()}, "transpose", [rows, cols](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto g = p.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[c * rows + r];
  });
}

Tensor normalize_rows(const Tensor& a) {
  const auto& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Matrix out(rows, cols);
  std::vector<double> norms(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < cols; ++c) sq += av(r, c) * av(r, c);
    norms[r] = std::sqrt(sq);
    if (norms[r] > 0.0) {
      for (std::size_t c = 0; c < cols; ++c) out(r, c) = av(r, c) / norms[r];
    }
  }
  return make_result(std::move(out), {a.node()}, "normalize_rows",
                     [norms = std::move(norms), rows, cols](Node& self) {
                       auto& p = *self.parents[0];
                       if (!p.requires_grad) return;
                       auto g = p.ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r) {
                         if (norms[r] == 0.0) continue;
                         double dot = 0.0;
                         for (std::size_t c = 0; c < cols; ++c)
                           dot += self.grad[r * cols + c] * self.value(r, c);
                         for (std::size_t c = 0; c < cols; ++c) {
                           g[r * cols + c] +=
                               (self.grad[r * cols + c] - self.value(r, c) * dot) / norms[r];
                         }
                       }
                     });
}

Tensor dropout(const Tensor& a, double p, Rng& rng, bool active) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout probability must be in [0, 1)");
  if (!active || p == 0.0) return a;
  const auto& av = a.value();
  std::vector<double> mask(av.size());
  std::bernoulli_distribution keep(1.0 - p);
  const double s = 1.0 / (1.0 - p);
  for (auto& m : mask) m = keep(rng) ? s : 0.0;
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * mask[i];
  return make_result(std::move(out), {a.node()}, "dropout", [mask = std::move(mask)](Node& self) {
    auto& pp = *self.parents[0];
    if (!pp.requires_grad) return;
    auto g = pp.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
  });
}

Tensor detach(const Tensor& a) { return Tensor::constant(a.value()); }

Tensor pick(const Tensor& a, std::size_t r, std::size_t c) {
  const auto& av = a.value();
  if (r >= av.rows() || c >= av.cols()) {
    throw std::invalid_argument("pick: (" + std::to_string(r) + ", " + std::to_string(c) +
                                ") out of range for " + shape_string(av.rows(), av.cols()));
  }
  const std::size_t idx = r * av.cols() + c;
  return make_result(Matrix(1, 1, av[idx]), {a.node()}, "pick", [idx](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad()[idx] += self.grad[0];
  });
}

Tensor aggregate(const Tensor& a, std::shared_ptr<const Aggregation> agg_ptr) {
  const auto& agg = *agg_ptr;
  const auto& av = a.value();
  if (av.rows() != agg.num_sources || agg.offsets.size() != agg.num_targets + 1) {
    throw std::invalid_argument("aggregate: input " + shape_string(av.rows(), av.cols()) +
                                " does not match aggregation over " +
                                std::to_string(agg.num_sources) + " sources");
  }
  const std::size_t cols = av.cols();
  Matrix out(agg.num_targets, cols);
  for (std::size_t v = 0; v < agg.num_targets; ++v) {
    double* orow = &out(v, 0);
    for (std::size_t j = agg.offsets[v]; j < agg.offsets[v + 1]; ++j) {
      const double w = agg.weights[j];
      const double* irow = &av(agg.sources[j], 0);
      for (std::size_t c = 0; c < cols; ++c) orow[c] += w * irow[c];
    }
  }
  return make_result(std::move(out), {a.node()}, "aggregate", [agg_ptr, cols](Node& self) {
    const auto& agg = *agg_ptr;
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto g = p.ensure_grad();
    for (std::size_t v = 0; v < agg.num_targets; ++v) {
      const double* grow = self.grad.data() + v * cols;
      for (std::size_t j = agg.offsets[v]; j < agg.offsets[v + 1]; ++j) {
        const double w = agg.weights[j];
        double* prow = g.data() + agg.sources[j] * cols;
        for (std::size_t c = 0; c < cols; ++c) prow[c] += w * grow[c];
      }
    }
  });
}

}  // namespace psi::ad
