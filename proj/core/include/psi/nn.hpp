#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psi/autodiff.hpp"
#include "psi/graph.hpp"
#include "psi/optim.hpp"

namespace psi {

/// Per-forward switches. Dropout is applied only when `dropout_active` is
/// set and an rng is supplied.
struct ForwardContext {
  bool dropout_active = false;
  double dropout_p = 0.0;
  Rng* rng = nullptr;

  ad::Tensor drop(const ad::Tensor& x) const;
};

/// y = x W (+ b), with W stored as in x out so rows are samples.
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
         bool bias = true);

  ad::Tensor forward(const ad::Tensor& x) const;
  const ad::Tensor& weight() const { return weight_; }
  const ad::Tensor& bias() const { return bias_; }
  std::size_t in_dim() const { return in_; }
  std::size_t out_dim() const { return out_; }

 private:
  ad::Tensor weight_;
  ad::Tensor bias_;
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

/// Linear -> ReLU -> dropout -> Linear.
class Mlp2 {
 public:
  Mlp2() = default;
  Mlp2(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden,
       std::size_t out, Rng& rng);

  ad::Tensor forward(const ad::Tensor& x, const ForwardContext& ctx) const;
  const Linear& first() const { return first_; }
  const Linear& second() const { return second_; }

 private:
  Linear first_;
  Linear second_;
};

/// X^glob: one row per global node, either a trainable parameter or a frozen
/// pre-loaded matrix.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  static EmbeddingTable trainable(ParameterStore& store, const std::string& name, std::size_t rows,
                                  std::size_t cols, Rng& rng);
  static EmbeddingTable frozen(ad::Matrix values);

  /// Rows for `ids` in the given order. Throws std::invalid_argument for an
  /// id >= rows().
  ad::Tensor lookup(std::span<const NodeId> ids) const;

  std::size_t rows() const { return table_.rows(); }
  std::size_t cols() const { return table_.cols(); }
  bool is_trainable() const { return table_.requires_grad(); }
  const ad::Tensor& tensor() const { return table_; }

 private:
  ad::Tensor table_;
};

/// Row-normalized in-edge aggregation: target v averages the rows of its
/// sources (weighted when the graph carries weights). With `reverse`, edges
/// are followed backwards.
std::shared_ptr<const ad::Aggregation> mean_aggregation(const LocalGraph& graph, bool reverse = false);

struct SageConfig {
  std::size_t in_dim = 0;
  std::size_t hidden_dim = 64;
  int layers = 2;
  bool skip = true;
  bool bidirectional = false;  // hidden_dim split in half, one half per edge direction
};

/// GraphSAGE-mean encoder. Per layer:
///   h_v <- relu(W_self h_v + W_neigh mean_{u in N(v)} h_u + b) + skip(h_v)
/// where skip is a linear projection when the width changes and the
/// identity otherwise.
class SageEncoder {
 public:
  SageEncoder() = default;
  SageEncoder(ParameterStore& store, const std::string& name, const SageConfig& config, Rng& rng);

  ad::Tensor forward(const ad::Tensor& x, const LocalGraph& graph, const ForwardContext& ctx) const;

  /// Looks up `node_ids` in `table` and encodes them over `edges` (global
  /// ids). Rows follow `node_ids` order.
  ad::Tensor encode(const EmbeddingTable& table, std::span<const NodeId> node_ids,
                    std::span<const Edge> edges, const ForwardContext& ctx) const;

  const SageConfig& config() const { return config_; }
  std::size_t out_dim() const { return config_.hidden_dim; }

  struct Layer {
    Linear self;   // with bias
    Linear neigh;  // no bias
    std::optional<Linear> skip_projection;
  };
  std::span<const Layer> layers(bool reverse_direction = false) const {
    return reverse_direction ? reverse_ : forward_;
  }

 private:
  ad::Tensor run_stack(std::span<const Layer> stack, ad::Tensor h,
                       const std::shared_ptr<const ad::Aggregation>& agg,
                       const ForwardContext& ctx) const;

  SageConfig config_;
  std::vector<Layer> forward_;
  std::vector<Layer> reverse_;
};

class Readout {
 public:
  virtual ~Readout() = default;
  /// n x F node representations (n >= 1) -> 1 x F summary.
  virtual ad::Tensor forward(const ad::Tensor& h, const ForwardContext& ctx) const = 0;
};

/// s = mean_rows(MLP2(H)).
class MeanMlpReadout final : public Readout {
 public:
  MeanMlpReadout(ParameterStore& store, const std::string& name, std::size_t dim, Rng& rng);
  ad::Tensor forward(const ad::Tensor& h, const ForwardContext& ctx) const override;
  const Mlp2& mlp() const { return mlp_; }

 private:
  Mlp2 mlp_;
};

enum class PreMixer { kNone, kMlp, kSelfAttention };

struct AttentionReadoutConfig {
  std::size_t dim = 64;
  PreMixer premixer = PreMixer::kMlp;
  bool positional = false;
  std::size_t max_length = 20;
};

/// Gated soft-attention pooling:
///   s = sum_i sigmoid(gate(h~_i)) * feat(h~_i),  h~ = premix(H [+ PE])
/// Row i of H is taken as observation position i when positional encoding
/// is on; otherwise the result is permutation invariant.
class GatedAttentionReadout final : public Readout {
 public:
  GatedAttentionReadout(ParameterStore& store, const std::string& name,
                        const AttentionReadoutConfig& config, Rng& rng);
  ad::Tensor forward(const ad::Tensor& h, const ForwardContext& ctx) const override;

  const Linear& gate() const { return gate_; }
  const Linear& feature() const { return feat_; }
  const AttentionReadoutConfig& config() const { return config_; }

 private:
  ad::Tensor premix(const ad::Tensor& h, const ForwardContext& ctx) const;

  AttentionReadoutConfig config_;
  Mlp2 mlp_;
  Linear query_, key_, value_;
  Linear gate_;
  Linear feat_;
};

/// Sinusoidal encoding, length x dim: PE(p, 2i) = sin(p / 10000^(2i/dim)),
/// PE(p, 2i+1) = cos(p / 10000^(2i/dim)).
ad::Matrix sinusoidal_encoding(std::size_t length, std::size_t dim);

/// Positional table length used for a given observed-node count: 20 for 8,
/// 36 for 16, 68 for 32, 132 for 64.
constexpr std::size_t positional_max_length(std::size_t n_obs) { return 2 * n_obs + 4; }

enum class DiscriminatorKind { kBilinear, kCosine };

class Discriminator {
 public:
  Discriminator() = default;
  static Discriminator bilinear(ParameterStore& store, const std::string& name, std::size_t dim,
                                Rng& rng);
  static Discriminator cosine(double temperature);

  /// Scores each row of `h` (n x F) against the summary `s` (1 x F); n x 1.
  /// Bilinear: h_i^T W s. Cosine: cos(h_i, s) / temperature, 0 for a zero
  /// vector.
  ad::Tensor score(const ad::Tensor& h, const ad::Tensor& s) const;

  DiscriminatorKind kind() const { return kind_; }
  const ad::Tensor& weight() const { return weight_; }
  double temperature() const { return temperature_; }

 private:
  DiscriminatorKind kind_ = DiscriminatorKind::kBilinear;
  ad::Tensor weight_;
  double temperature_ = 1.0;
};

/// logits = Linear(s) or Linear(concat(s, Linear_g(g))).
class PredictionHead {
 public:
  PredictionHead() = default;
  PredictionHead(ParameterStore& store, const std::string& name, std::size_t summary_dim,
                 std::size_t num_classes, std::size_t subgraph_feature_dim, Rng& rng);

  /// Throws std::invalid_argument when `g` is given to a head built without
  /// a subgraph-feature path, or the other way round.
  ad::Tensor logits(const ad::Tensor& s, const std::optional<ad::Tensor>& g = std::nullopt) const;

  bool uses_subgraph_feature() const { return feature_transform_.has_value(); }
  const Linear& output() const { return output_; }

 private:
  Linear output_;
  std::optional<Linear> feature_transform_;
};

}  // namespace psi
