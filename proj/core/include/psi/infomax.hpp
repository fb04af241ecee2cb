#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "psi/autodiff.hpp"
#include "psi/graph.hpp"
#include "psi/random.hpp"

namespace psi {

struct LossWeights {
  double lambda_single = 1.0;  // weight of the variant's InfoMax loss
  double lambda_khop = 1.0;
  double lambda_second = 1.0;

  void validate() const;
};

// Score tensors below are n x 1 (or any shape; entries are what count).

/// -mean(log sigmoid(pos)) - mean(log(1 - sigmoid(neg))), evaluated as
/// mean(softplus(-pos)) + mean(softplus(neg)). Throws on an empty side.
ad::Tensor gd_loss(const ad::Tensor& pos, const ad::Tensor& neg);

/// Row i holds positive pos(i, 0) against negatives neg(i, :).
/// Loss = mean_i [logsumexp(pos_i, neg_i.) - pos_i], which falls as the
/// positive scores rise.
ad::Tensor infonce_loss(const ad::Tensor& pos, const ad::Tensor& neg);

/// k-hop loss: a single mean over every positive and negative term,
///   (sum softplus(-pos) + sum softplus(neg)) / (|pos| + |neg|).
/// An empty (undefined or zero-row) side is skipped with a warning; both
/// empty throws.
ad::Tensor khop_loss(const ad::Tensor& pos, const ad::Tensor& neg);

/// Uniform random permutation of 0..n-1.
std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng);

/// Rows of `h` in a uniformly random order (no derangement enforced).
ad::Tensor shuffle_negatives(const ad::Tensor& h, Rng& rng);

/// Row-stacks the node encodings of every batch entry except `target`.
/// Throws std::invalid_argument for a batch smaller than two.
ad::Tensor cross_subgraph_negatives(std::span<const ad::Tensor> batch, std::size_t target);

// ---- augmentation ------------------------------------------------------

/// A subgraph as seen by an encoder: nodes (global ids), directed edges,
/// optional edge weights, and optional per-node feature masks.
struct SubgraphView {
  std::vector<NodeId> nodes;
  std::vector<Edge> edges;
  std::vector<double> weights;      // empty = unit weights
  std::vector<std::uint8_t> masked; // empty = nothing masked; else 1 = zero the row

  LocalGraph local() const { return make_local_graph(nodes, edges, weights); }
};

enum class AugmentKind { kNodeDrop, kEdgePerturb, kAttrMask, kPpr };

enum class PprNormalization {
  kSymmetric,      // D^-1/2 (A + I) D^-1/2
  kRowStochastic,  // D^-1 (A + I)
};

struct PprOptions {
  double alpha = 0.15;
  std::size_t top_t = 32;
  PprNormalization normalization = PprNormalization::kSymmetric;
  std::size_t dense_cap = 2000;
};

/// Pi = alpha (I - (1 - alpha) T)^-1 for the symmetrized graph with self
/// loops, T as selected by `normalization`, solved densely. `edges` are
/// local index pairs. Throws for alpha outside (0, 1) or n > dense_cap.
ad::Matrix ppr_matrix(std::size_t n, std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
                      const PprOptions& options = {});

/// Diffused view: for every node i, the top_t largest entries Pi(i, j)
/// become weighted edges j -> i. Ties keep the lower index.
SubgraphView ppr_diffusion(const SubgraphView& view, const PprOptions& options = {});

struct Augmentor {
  AugmentKind kind = AugmentKind::kNodeDrop;
  double p = 0.2;
  PprOptions ppr;

  /// Throws std::invalid_argument for p outside [0, 1).
  SubgraphView apply(const SubgraphView& view, Rng& rng) const;
};

SubgraphView drop_nodes(const SubgraphView& view, double p, Rng& rng);
SubgraphView perturb_edges(const SubgraphView& view, double p, Rng& rng);
SubgraphView mask_attributes(const SubgraphView& view, double p, Rng& rng);

// ---- conditional GD bound ------------------------------------------------

struct CgdResult {
  double i_gd = 0.0;
  double i_cgd = 0.0;
  bool holds = false;
};

/// Exact GD-type objectives for scores f (|X| x |Y|) and a strictly
/// positive joint p_xy (same shape, sums to 1):
///   I = E_p(x,y)[log sigmoid f] + E_{p(x) q(y|x)}[log(1 - sigmoid f)]
/// with q = p(y) for I_GD and p(y) restricted to
///   Y_c(x) = { y : exp f(x,y) >= E_p(y) exp f(x,y) }
/// and renormalized for I_CGD.
CgdResult verify_cgd_bound(const ad::Matrix& f, const ad::Matrix& p_xy);

struct CgdInstance {
  ad::Matrix f;
  ad::Matrix p_xy;
};

/// Random sizes in [1, max_size], scores N(0, scale^2), joint from
/// normalized U(0.05, 1) weights.
CgdInstance random_cgd_instance(std::size_t max_size, double scale, Rng& rng);

}  // namespace psi
