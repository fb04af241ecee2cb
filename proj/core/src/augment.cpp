#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

#include "psi/infomax.hpp"

namespace psi {

ad::Matrix ppr_matrix(std::size_t n, std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
                      const PprOptions& options) {
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw std::invalid_argument("ppr alpha must be in (0, 1)");
  if (n > options.dense_cap) {
    throw std::invalid_argument("ppr on " + std::to_string(n) + " nodes exceeds the dense cap of " +
                                std::to_string(options.dense_cap) + "; subsample the input first");
  }
  if (n == 0) return {};
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const auto& [s, d] : edges) {
    if (s >= n || d >= n) throw std::invalid_argument("ppr edge endpoint out of range");
    if (s == d) continue;  // replaced by the added identity
    a(s, d) = 1.0;
    a(d, s) = 1.0;
  }
  const Eigen::VectorXd deg = a.rowwise().sum();
  Eigen::MatrixXd t;
  if (options.normalization == PprNormalization::kSymmetric) {
    const Eigen::VectorXd inv_sqrt = deg.array().rsqrt();
    t = inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
  } else {
    t = deg.cwiseInverse().asDiagonal() * a;
  }
  const auto nn = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(nn, nn) - (1.0 - options.alpha) * t;
  Eigen::MatrixXd pi = options.alpha * system.partialPivLu().solve(Eigen::MatrixXd::Identity(nn, nn));
  ad::Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out(i, j) = pi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return out;
}

SubgraphView ppr_diffusion(const SubgraphView& view, const PprOptions& options) {
  if (options.top_t == 0) throw std::invalid_argument("ppr top_t must be >= 1");
  const auto local = view.local();
  const auto pi = ppr_matrix(local.size(), local.edges, options);
  const auto n = local.size();
  SubgraphView out;
  out.nodes = view.nodes;
  out.masked = view.masked;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto keep = std::min(options.top_t, n);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::size_t x, std::size_t y) {
                        return pi(i, x) != pi(i, y) ? pi(i, x) > pi(i, y) : x < y;
                      });
    for (std::size_t r = 0; r < keep; ++r) {
      const auto j = order[r];
      out.edges.push_back({view.nodes[j], view.nodes[i]});
      out.weights.push_back(pi(i, j));
    }
  }
  return out;
}

namespace {
void check_p(double p) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("augmentation probability must be in [0, 1)");
}
}  // namespace

SubgraphView drop_nodes(const SubgraphView& view, double p, Rng& rng) {
  check_p(p);
  if (p == 0.0 || view.nodes.empty()) return view;
  std::bernoulli_distribution drop(p);
  std::vector<std::uint8_t> keep(view.nodes.size(), 0);
  bool any = false;
  for (auto& k : keep) {
    k = drop(rng) ? 0 : 1;
    any = any || k;
  }
  if (!any) {
    std::uniform_int_distribution<std::size_t> pick(0, view.nodes.size() - 1);
    keep[pick(rng)] = 1;
  }
  SubgraphView out;
  std::set<NodeId> kept;
  for (std::size_t i = 0; i < view.nodes.size(); ++i) {
    if (!keep[i]) continue;
    out.nodes.push_back(view.nodes[i]);
    if (!view.masked.empty()) out.masked.push_back(view.masked[i]);
    kept.insert(view.nodes[i]);
  }
  for (std::size_t e = 0; e < view.edges.size(); ++e) {
    const auto& edge = view.edges[e];
    if (kept.contains(edge.src) && kept.contains(edge.dst)) {
      out.edges.push_back(edge);
      if (!view.weights.empty()) out.weights.push_back(view.weights[e]);
    }
  }
  return out;
}

SubgraphView perturb_edges(const SubgraphView& view, double p, Rng& rng) {
  check_p(p);
  if (p == 0.0) return view;
  SubgraphView out;
  out.nodes = view.nodes;
  out.masked = view.masked;
  std::set<Edge> present(view.edges.begin(), view.edges.end());
  std::bernoulli_distribution drop(p);
  for (std::size_t e = 0; e < view.edges.size(); ++e) {
    if (drop(rng)) continue;
    out.edges.push_back(view.edges[e]);
    if (!view.weights.empty()) out.weights.push_back(view.weights[e]);
  }
  // Add as many fresh non-edges as the binomial draw of p * |E|, so the
  // expected edge count is unchanged.
  std::binomial_distribution<std::size_t> additions(view.edges.size(), p);
  std::size_t want = additions(rng);
  const std::size_t n = view.nodes.size();
  const std::size_t capacity = n * (n - (n > 0 ? 1 : 0));
  want = std::min(want, capacity > present.size() ? capacity - present.size() : 0);
  if (want > 0) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    while (want > 0) {
      const auto a = view.nodes[pick(rng)], b = view.nodes[pick(rng)];
      if (a == b) continue;
      const Edge edge{a, b};
      if (!present.insert(edge).second) continue;
      out.edges.push_back(edge);
      if (!view.weights.empty()) out.weights.push_back(1.0);
      --want;
    }
  }
  return out;
}

SubgraphView mask_attributes(const SubgraphView& view, double p, Rng& rng) {
  check_p(p);
  if (p == 0.0) return view;
  SubgraphView out = view;
  if (out.masked.empty()) out.masked.assign(view.nodes.size(), 0);
  std::bernoulli_distribution mask(p);
  for (auto& m : out.masked) m = static_cast<std::uint8_t>(m || mask(rng));
  return out;
}

SubgraphView Augmentor::apply(const SubgraphView& view, Rng& rng) const {
  switch (kind) {
    case AugmentKind::kNodeDrop:
      return drop_nodes(view, p, rng);
    case AugmentKind::kEdgePerturb:
      return perturb_edges(view, p, rng);
    case AugmentKind::kAttrMask:
      return mask_attributes(view, p, rng);
    case AugmentKind::kPpr:
      return ppr_diffusion(view, ppr);
  }
  return view;
}

}  // namespace psi
