#include "psi/infomax.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace psi {

void LossWeights::validate() const {
  if (!(lambda_single >= 0.0 && lambda_khop >= 0.0 && lambda_second >= 0.0)) {
    throw std::invalid_argument("loss weights must be >= 0");
  }
}

namespace {
bool empty_side(const ad::Tensor& t) { return !t.defined() || t.value().empty(); }
}  // namespace

ad::Tensor gd_loss(const ad::Tensor& pos, const ad::Tensor& neg) {
  if (empty_side(pos) || empty_side(neg)) {
    throw std::invalid_argument("gd_loss needs at least one positive and one negative score");
  }
  return ad::add(ad::mean(ad::softplus(ad::scale(pos, -1.0))), ad::mean(ad::softplus(neg)));
}

ad::Tensor infonce_loss(const ad::Tensor& pos, const ad::Tensor& neg) {
  if (empty_side(pos)) throw std::invalid_argument("infonce_loss: no positive scores");
  if (empty_side(neg) || neg.cols() == 0) throw std::invalid_argument("infonce_loss: no negative scores");
  if (pos.cols() != 1 || pos.rows() != neg.rows()) {
    throw std::invalid_argument("infonce_loss: positives " + ad::shape_string(pos.rows(), pos.cols()) +
                                " vs negatives " + ad::shape_string(neg.rows(), neg.cols()));
  }
  auto lse = ad::logsumexp_rows(ad::concat_cols(pos, neg));
  return ad::mean(ad::sub(lse, pos));
}

ad::Tensor khop_loss(const ad::Tensor& pos, const ad::Tensor& neg) {
  const bool no_pos = empty_side(pos), no_neg = empty_side(neg);
  if (no_pos && no_neg) throw std::invalid_argument("khop_loss: no positive or negative scores");
  if (no_pos || no_neg) {
    // Common when the neighborhood lies inside the subgraph; warn once, then log at debug.
    static std::atomic<bool> warned{false};
    const auto level = warned.exchange(true) ? spdlog::level::debug : spdlog::level::warn;
    spdlog::log(level, "khop_loss: {} side is empty, using the other side only", no_pos ? "positive" : "negative");
  }
  const std::size_t count = (no_pos ? 0 : pos.value().size()) + (no_neg ? 0 : neg.value().size());
  ad::Tensor total;
  if (!no_pos) total = ad::sum(ad::softplus(ad::scale(pos, -1.0)));
  if (!no_neg) {
    auto n = ad::sum(ad::softplus(neg));
    total = total.defined() ? ad::add(total, n) : n;
  }
  return ad::scale(total, 1.0 / static_cast<double>(count));
}

std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

ad::Tensor shuffle_negatives(const ad::Tensor& h, Rng& rng) {
  if (h.rows() <= 1) return h;
  const auto perm = random_permutation(h.rows(), rng);
  return ad::gather_rows(h, perm);
}

ad::Tensor cross_subgraph_negatives(std::span<const ad::Tensor> batch, std::size_t target) {
  if (batch.size() < 2) {
    throw std::invalid_argument("cross-subgraph negatives need a batch of at least 2 subgraphs");
  }
  if (target >= batch.size()) throw std::invalid_argument("target index outside the batch");
  std::vector<ad::Tensor> others;
  others.reserve(batch.size() - 1);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (i != target) others.push_back(batch[i]);
  }
  return ad::concat_rows(others);
}

CgdResult verify_cgd_bound(const ad::Matrix& f, const ad::Matrix& p_xy) {
  const auto nx = f.rows(), ny = f.cols();
  if (nx == 0 || ny == 0 || p_xy.rows() != nx || p_xy.cols() != ny) {
    throw std::invalid_argument("score table and joint must share a nonempty shape");
  }
  std::vector<double> px(nx, 0.0), py(ny, 0.0);
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t y = 0; y < ny; ++y) {
      if (!(p_xy(x, y) > 0.0)) throw std::invalid_argument("joint must be strictly positive");
      px[x] += p_xy(x, y);
      py[y] += p_xy(x, y);
    }
  }
  auto log_sigmoid = [](double v) { return -std::log1p(std::exp(-std::abs(v))) + std::min(v, 0.0); };
  auto log_one_minus_sigmoid = [&](double v) { return log_sigmoid(-v); };

  double joint = 0.0;
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t y = 0; y < ny; ++y) joint += p_xy(x, y) * log_sigmoid(f(x, y));
  }
  double marg = 0.0, cond = 0.0;
  for (std::size_t x = 0; x < nx; ++x) {
    double expected = 0.0;
    for (std::size_t y = 0; y < ny; ++y) expected += py[y] * std::exp(f(x, y));
    double neg_p = 0.0, neg_q = 0.0, mass_q = 0.0;
    for (std::size_t y = 0; y < ny; ++y) {
      const double term = log_one_minus_sigmoid(f(x, y));
      neg_p += py[y] * term;
      // Relative slack absorbs rounding in `expected` for ties such as constant f.
      if (std::exp(f(x, y)) >= expected * (1.0 - 1e-12)) {
        neg_q += py[y] * term;
        mass_q += py[y];
      }
    }
    if (mass_q <= 0.0) {
      // Floating-point corner: the argmax always qualifies in exact arithmetic.
      std::size_t best = 0;
      for (std::size_t y = 1; y < ny; ++y) best = f(x, y) > f(x, best) ? y : best;
      neg_q = log_one_minus_sigmoid(f(x, best));
      mass_q = 1.0;
    }
    marg += px[x] * neg_p;
    cond += px[x] * (neg_q / mass_q);
  }
  CgdResult r;
  r.i_gd = joint + marg;
  r.i_cgd = joint + cond;
  r.holds = r.i_cgd <= r.i_gd + 1e-12;
  return r;
}

CgdInstance random_cgd_instance(std::size_t max_size, double scale, Rng& rng) {
  std::uniform_int_distribution<std::size_t> size(1, std::max<std::size_t>(max_size, 1));
  std::normal_distribution<double> score(0.0, scale);
  std::uniform_real_distribution<double> weight(0.05, 1.0);
  const auto nx = size(rng), ny = size(rng);
  CgdInstance inst{ad::Matrix(nx, ny), ad::Matrix(nx, ny)};
  double total = 0.0;
  for (std::size_t i = 0; i < nx * ny; ++i) {
    inst.f[i] = score(rng);
    inst.p_xy[i] = weight(rng);
    total += inst.p_xy[i];
  }
  for (auto& v : inst.p_xy.data()) v /= total;
  return inst;
}

}  // namespace psi
