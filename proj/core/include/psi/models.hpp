#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psi/autodiff.hpp"
#include "psi/graph.hpp"
#include "psi/infomax.hpp"
#include "psi/nn.hpp"
#include "psi/optim.hpp"

namespace psi {

enum class Variant {
  kBaseline,  // encoder-readout only, no InfoMax term
  kDgi,
  kInfoGraph,
  kMvgrl,
  kGraphCl,
  kKhop,
};

std::string_view variant_name(Variant v);
/// Accepts "baseline", "ps-dgi", "ps-infograph", "ps-mvgrl", "ps-graphcl",
/// "khop" (case-insensitive, "-"/"_" interchangeable). Throws on anything else.
Variant parse_variant(std::string_view name);

enum class ReadoutKind { kMeanMlp, kAttention };

struct ModelConfig {
  Variant variant = Variant::kInfoGraph;
  /// With variant == kKhop: the second-stage model (kDgi or kInfoGraph).
  std::optional<Variant> second;

  std::size_t input_dim = 0;   // F^in
  std::size_t hidden_dim = 64; // F
  std::size_t num_classes = 2;
  std::size_t subgraph_feature_dim = 0;  // F'; 0 = no subgraph feature
  bool bidirectional = false;
  bool skip = true;

  /// Readout for s^obs; unset picks attention for k-hop models and mean-MLP
  /// for the rest.
  std::optional<ReadoutKind> readout;
  PreMixer premixer = PreMixer::kMlp;
  bool use_positional_encoding = false;
  std::size_t positional_max_length = 20;

  double dropout = 0.2;
  double temperature = 0.2;  // cosine discriminator of the InfoNCE variant
  double aug_p = 0.2;
  PprOptions ppr;

  KhopOptions khop;             // k, cap, p_d (p_d applies in training only)
  double pool_ratio = 1e-2;
  bool khop_score_observed = true;  // top-k over V^obs ∪ N^k rather than N^k only
  bool concat_obs_summary = false;  // k-hop prediction reads [s^khop, s^obs]
  EdgeSource edge_source = EdgeSource::kSubgraph;

  LossWeights weights;

  bool two_stage() const { return variant == Variant::kKhop && second.has_value(); }
  ReadoutKind effective_readout() const;
  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;
};

enum class StepMode {
  kInference,          // logits only, dropout off
  kTraining,           // losses, dropout and edge dropout on
  kTrainingNoDropout,  // losses with dropout and edge dropout off (gradient checks)
};

struct StepOutput {
  ad::Tensor logits;  // 1 x C
  std::optional<ad::Tensor> loss_graph;
  std::optional<ad::Tensor> loss_infomax;  // single-model InfoMax loss
  std::optional<ad::Tensor> loss_khop;
  std::optional<ad::Tensor> loss_second;
  std::optional<ad::Tensor> total;
};

/// total = loss_graph + lambda * loss_infomax + lambda_khop * loss_khop +
/// lambda_second * loss_second over the terms that are present, added in
/// that order.
ad::Tensor compose_total(const StepOutput& out, const LossWeights& weights);
/// The same sum over plain doubles; equals compose_total(...).item()
/// bit-exactly.
double recompose_total(const StepOutput& out, const LossWeights& weights);

/// Indices into `scores` of the k largest values, ties to the lower `ids`
/// entry. k is clamped to [1, scores.size()].
std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::span<const NodeId> ids,
                                       std::size_t k);

/// ceil(ratio * n) with a floor of 1 (and n when n < 1 would be selected).
std::size_t pool_count(double ratio, std::size_t n);

struct PooledSummary {
  ad::Tensor summary;                 // 1 x F
  std::vector<std::size_t> selected;  // rows of d / h, best first
};

/// s = softmax(d[idx])^T transform(h[idx]) with idx = top_k(d). `d` is
/// n x 1, `h` is n x F, `ids` names the rows for tie breaking.
PooledSummary khop_pool(const ad::Tensor& d, const ad::Tensor& h, std::span<const NodeId> ids,
                        double ratio, const std::function<ad::Tensor(const ad::Tensor&)>& transform);

class PsiModel;

/// Per-batch cache of full-subgraph encodings and augmented summaries, the
/// source of cross-subgraph negatives. Entries are built lazily and shared
/// by every record of the batch, so each is encoded once per step.
class BatchContext {
 public:
  BatchContext(const PsiModel& model, std::vector<const SubgraphRecord*> records,
               const ForwardContext& ctx, Rng& rng);

  std::size_t size() const { return records_.size(); }
  const SubgraphRecord& record(std::size_t i) const { return *records_.at(i); }

  /// H^sub of entry i through the primary encoder.
  const ad::Tensor& full_encoding(std::size_t i);
  /// Summary of a randomly augmented copy of entry i (GraphCL views).
  const ad::Tensor& augmented_summary(std::size_t i);

  /// Node rows of every entry except i.
  ad::Tensor other_encodings(std::size_t i);
  /// Augmented summaries of every entry except i, in batch order.
  std::vector<ad::Tensor> other_summaries(std::size_t i);

 private:
  const PsiModel* model_;
  std::vector<const SubgraphRecord*> records_;
  ForwardContext ctx_;
  Rng* rng_;
  std::vector<std::optional<ad::Tensor>> encodings_;
  std::vector<std::optional<ad::Tensor>> augmented_;
};

struct KhopResult {
  ad::Tensor summary;  // s^khop
  std::optional<ad::Tensor> loss;
  KhopPartition partition;
  std::vector<NodeId> scored_ids;     // rows of the score vector
  std::vector<std::size_t> selected;  // rows picked by top-k
};

/// A configured PSI model: encoder(s), readout(s), discriminator(s), the
/// k-hop pooling MLP when used, and the prediction head, all registered in
/// one ParameterStore.
class PsiModel {
 public:
  /// `graph` must outlive the model. With `features` the embedding table is
  /// frozen to it (rows = graph nodes); otherwise a trainable table of
  /// config.input_dim columns is created.
  PsiModel(const ModelConfig& config, const GlobalGraph& graph, std::optional<ad::Matrix> features,
           std::uint64_t init_seed);

  PsiModel(const PsiModel&) = delete;
  PsiModel& operator=(const PsiModel&) = delete;

  const ModelConfig& config() const { return config_; }
  const GlobalGraph& graph() const { return *graph_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }

  /// Algorithm 1 for one record. `batch` supplies cross-subgraph negatives
  /// and must be given in training for InfoGraph-style and GraphCL models
  /// (and two-stage models with an InfoGraph second stage).
  StepOutput step(const SubgraphRecord& record, const PartialSubgraph& partial, BatchContext* batch,
                  std::size_t batch_position, Rng& rng, StepMode mode) const;

  /// Mean total over a batch (each record at its own position).
  struct BatchOutput {
    ad::Tensor loss;
    std::vector<StepOutput> steps;
  };
  BatchOutput batch_step(std::span<const SubgraphRecord* const> records,
                         std::span<const PartialSubgraph> partials, Rng& rng, StepMode mode) const;

  /// Logits with dropout off.
  ad::Tensor predict(const SubgraphRecord& record, const PartialSubgraph& partial, Rng& rng) const;

  // Building blocks, public for tests and the batch cache.
  ForwardContext forward_context(StepMode mode, Rng& rng) const;
  SubgraphView full_view(const SubgraphRecord& record) const;
  SubgraphView partial_view(const PartialSubgraph& partial) const;
  /// Encodes a view with encoder 0 or 1, zeroing masked feature rows.
  ad::Tensor encode_view(const SubgraphView& view, const ForwardContext& ctx, int encoder = 0) const;
  /// Rows of encode_view for `view` with its feature rows shuffled.
  ad::Tensor encode_corrupted(const SubgraphView& view, const ForwardContext& ctx, Rng& rng,
                              int encoder = 0) const;
  ad::Tensor summarize(const ad::Tensor& h, const ForwardContext& ctx, int readout = 0) const;
  ad::Tensor augmented_summary(const SubgraphRecord& record, const ForwardContext& ctx, Rng& rng) const;
  KhopResult khop_forward(const SubgraphRecord& record, const PartialSubgraph& partial,
                          const ad::Tensor& s_obs, Rng& rng, StepMode mode) const;

  const SageEncoder& encoder(int i = 0) const { return i == 0 ? encoder_ : encoder2_; }
  const Discriminator& discriminator(int i = 0) const { return i == 0 ? disc_ : disc2_; }
  const EmbeddingTable& embeddings() const { return table_; }

 private:
  ad::Tensor variant_loss(Variant variant, const SubgraphRecord& record, const PartialSubgraph& partial,
                          const ad::Tensor& s_obs, const Discriminator& disc, BatchContext* batch,
                          std::size_t position, const ForwardContext& ctx, Rng& rng) const;

  ModelConfig config_;
  const GlobalGraph* graph_;
  ParameterStore store_;
  EmbeddingTable table_;
  SageEncoder encoder_;
  SageEncoder encoder2_;  // PS-MVGRL diffused view
  std::unique_ptr<Readout> readout_;
  std::unique_ptr<Readout> readout2_;
  Discriminator disc_;
  Discriminator disc2_;  // two-stage second model
  Mlp2 khop_mlp_;
  PredictionHead head_;
};

}  // namespace psi
