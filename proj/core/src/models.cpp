#include "psi/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace psi {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kDgi: return "ps-dgi";
    case Variant::kInfoGraph: return "ps-infograph";
    case Variant::kMvgrl: return "ps-mvgrl";
    case Variant::kGraphCl: return "ps-graphcl";
    case Variant::kKhop: return "khop";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  std::string key;
  for (char c : name) key.push_back(c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  for (auto v : {Variant::kBaseline, Variant::kDgi, Variant::kInfoGraph, Variant::kMvgrl, Variant::kGraphCl,
                 Variant::kKhop}) {
    const auto full = variant_name(v);
    if (key == full) return v;
    if (full.starts_with("ps-") && key == full.substr(3)) return v;
  }
  if (key == "k-hop" || key == "khop-psi") return Variant::kKhop;
  throw std::invalid_argument("unknown model variant '" + std::string(name) + "'");
}

ReadoutKind ModelConfig::effective_readout() const {
  return readout.value_or(variant == Variant::kKhop ? ReadoutKind::kAttention : ReadoutKind::kMeanMlp);
}

void ModelConfig::validate() const {
  if (input_dim == 0) throw std::invalid_argument("input_dim must be > 0");
  if (hidden_dim == 0) throw std::invalid_argument("hidden_dim must be > 0");
  if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  if (bidirectional && hidden_dim % 2 != 0) throw std::invalid_argument("bidirectional needs an even hidden_dim");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (!(aug_p >= 0.0 && aug_p < 1.0)) throw std::invalid_argument("aug_p must be in [0, 1)");
  if (!(pool_ratio > 0.0 && pool_ratio <= 1.0)) throw std::invalid_argument("pool_ratio must be in (0, 1]");
  if (khop.k < 1) throw std::invalid_argument("k must be >= 1");
  if (khop.cap && *khop.cap == 0) throw std::invalid_argument("neighborhood cap must be > 0");
  if (!(khop.edge_drop >= 0.0 && khop.edge_drop < 1.0)) throw std::invalid_argument("p_d must be in [0, 1)");
  if (use_positional_encoding && effective_readout() != ReadoutKind::kAttention) {
    throw std::invalid_argument("positional encoding needs the attention readout");
  }
  if (second) {
    if (variant != Variant::kKhop) throw std::invalid_argument("a second stage is only defined after k-hop PSI");
    if (*second != Variant::kDgi && *second != Variant::kInfoGraph) {
      throw std::invalid_argument("second-stage model must be ps-dgi or ps-infograph, got " +
                                  std::string(variant_name(*second)) +
                                  " (a second model needing its own augmented views is not supported)");
    }
  }
  if (concat_obs_summary && variant != Variant::kKhop) {
    throw std::invalid_argument("concat_obs_summary applies to k-hop models only");
  }
  weights.validate();
}

ad::Tensor compose_total(const StepOutput& out, const LossWeights& weights) {
  if (!out.loss_graph) throw std::invalid_argument("compose_total: no graph loss");
  ad::Tensor total = *out.loss_graph;
  if (out.loss_infomax) total = ad::add(total, ad::scale(*out.loss_infomax, weights.lambda_single));
  if (out.loss_khop) total = ad::add(total, ad::scale(*out.loss_khop, weights.lambda_khop));
  if (out.loss_second) total = ad::add(total, ad::scale(*out.loss_second, weights.lambda_second));
  return total;
}

double recompose_total(const StepOutput& out, const LossWeights& weights) {
  if (!out.loss_graph) throw std::invalid_argument("recompose_total: no graph loss");
  double total = out.loss_graph->item();
  if (out.loss_infomax) total = total + out.loss_infomax->item() * weights.lambda_single;
  if (out.loss_khop) total = total + out.loss_khop->item() * weights.lambda_khop;
  if (out.loss_second) total = total + out.loss_second->item() * weights.lambda_second;
  return total;
}

std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::span<const NodeId> ids,
                                       std::size_t k) {
  if (scores.size() != ids.size()) throw std::invalid_argument("top_k: scores and ids differ in length");
  if (scores.empty()) throw std::invalid_argument("top_k over an empty set");
  k = std::clamp<std::size_t>(k, 1, scores.size());
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return ids[a] != ids[b] ? ids[a] < ids[b] : a < b;
                    });
  order.resize(k);
  return order;
}

std::size_t pool_count(double ratio, std::size_t n) {
  if (n == 0) return 0;
  const auto raw = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(raw, 1, n);
}

PooledSummary khop_pool(const ad::Tensor& d, const ad::Tensor& h, std::span<const NodeId> ids,
                        double ratio, const std::function<ad::Tensor(const ad::Tensor&)>& transform) {
  if (d.cols() != 1 || d.rows() != h.rows()) {
    throw std::invalid_argument("khop_pool: scores " + ad::shape_string(d.rows(), d.cols()) + " vs rows " +
                                ad::shape_string(h.rows(), h.cols()));
  }
  PooledSummary out;
  out.selected = top_k_indices(d.value().data(), ids, pool_count(ratio, d.rows()));
  auto weights = ad::softmax_rows(ad::transpose(ad::gather_rows(d, out.selected)));
  auto rows = ad::gather_rows(h, out.selected);
  out.summary = ad::matmul(weights, transform ? transform(rows) : rows);
  return out;
}

// ---- batch cache -------------------------------------------------------

BatchContext::BatchContext(const PsiModel& model, std::vector<const SubgraphRecord*> records,
                           const ForwardContext& ctx, Rng& rng)
    : model_(&model),
      records_(std::move(records)),
      ctx_(ctx),
      rng_(&rng),
      encodings_(records_.size()),
      augmented_(records_.size()) {}

const ad::Tensor& BatchContext::full_encoding(std::size_t i) {
  auto& slot = encodings_.at(i);
  if (!slot) slot = model_->encode_view(model_->full_view(*records_[i]), ctx_, 0);
  return *slot;
}

const ad::Tensor& BatchContext::augmented_summary(std::size_t i) {
  auto& slot = augmented_.at(i);
  if (!slot) slot = model_->augmented_summary(*records_[i], ctx_, *rng_);
  return *slot;
}

ad::Tensor BatchContext::other_encodings(std::size_t i) {
  std::vector<ad::Tensor> all;
  all.reserve(size());
  for (std::size_t j = 0; j < size(); ++j) all.push_back(full_encoding(j));
  return cross_subgraph_negatives(all, i);
}

std::vector<ad::Tensor> BatchContext::other_summaries(std::size_t i) {
  std::vector<ad::Tensor> out;
  for (std::size_t j = 0; j < size(); ++j) {
    if (j != i) out.push_back(augmented_summary(j));
  }
  return out;
}

// ---- model ---------------------------------------------------------------

namespace {

std::unique_ptr<Readout> make_readout(const ModelConfig& c, ParameterStore& store, const std::string& name,
                                      Rng& rng) {
  if (c.effective_readout() == ReadoutKind::kMeanMlp) {
    return std::make_unique<MeanMlpReadout>(store, name, c.hidden_dim, rng);
  }
  AttentionReadoutConfig rc;
  rc.dim = c.hidden_dim;
  rc.premixer = c.premixer;
  rc.positional = c.use_positional_encoding;
  rc.max_length = c.positional_max_length;
  return std::make_unique<GatedAttentionReadout>(store, name, rc, rng);
}

}  // namespace

PsiModel::PsiModel(const ModelConfig& config, const GlobalGraph& graph, std::optional<ad::Matrix> features,
                   std::uint64_t init_seed)
    : config_(config), graph_(&graph) {
  if (features) {
    if (config_.input_dim == 0) config_.input_dim = features->cols();
    if (features->rows() != graph.num_nodes() || features->cols() != config_.input_dim) {
      throw std::invalid_argument("feature table " + ad::shape_string(features->rows(), features->cols()) +
                                  " does not match " + std::to_string(graph.num_nodes()) + " nodes x " +
                                  std::to_string(config_.input_dim) + " features");
    }
  }
  config_.validate();
  Rng rng(init_seed);
  table_ = features ? EmbeddingTable::frozen(std::move(*features))
                    : EmbeddingTable::trainable(store_, "embedding", graph.num_nodes(), config_.input_dim, rng);

  const SageConfig sage{config_.input_dim, config_.hidden_dim, 2, config_.skip, config_.bidirectional};
  encoder_ = SageEncoder(store_, "encoder", sage, rng);
  readout_ = make_readout(config_, store_, "readout", rng);
  if (config_.variant == Variant::kMvgrl) {
    encoder2_ = SageEncoder(store_, "encoder2", sage, rng);
    readout2_ = make_readout(config_, store_, "readout2", rng);
  }
  if (config_.variant == Variant::kGraphCl) {
    disc_ = Discriminator::cosine(config_.temperature);
  } else if (config_.variant != Variant::kBaseline) {
    disc_ = Discriminator::bilinear(store_, "disc", config_.hidden_dim, rng);
  }
  if (config_.variant == Variant::kKhop) {
    khop_mlp_ = Mlp2(store_, "khop_mlp", config_.hidden_dim, config_.hidden_dim, config_.hidden_dim, rng);
  }
  if (config_.two_stage()) disc2_ = Discriminator::bilinear(store_, "disc2", config_.hidden_dim, rng);
  const std::size_t summary_dim = config_.hidden_dim * (config_.concat_obs_summary ? 2 : 1);
  head_ = PredictionHead(store_, "head", summary_dim, config_.num_classes, config_.subgraph_feature_dim, rng);
}

ForwardContext PsiModel::forward_context(StepMode mode, Rng& rng) const {
  return ForwardContext{mode == StepMode::kTraining, config_.dropout, &rng};
}

SubgraphView PsiModel::full_view(const SubgraphRecord& record) const {
  SubgraphView v;
  v.nodes = record.node_ids;
  if (config_.edge_source == EdgeSource::kSubgraph) {
    v.edges = record.edge_pairs;
  } else {
    std::unordered_set<NodeId> members(record.node_ids.begin(), record.node_ids.end());
    for (auto u : record.node_ids) {
      for (auto w : graph_->out_neighbors(u)) {
        if (members.contains(w)) v.edges.push_back({u, w});
      }
    }
  }
  return v;
}

SubgraphView PsiModel::partial_view(const PartialSubgraph& partial) const {
  return SubgraphView{partial.observed_ids, partial.observed_edges, {}, {}};
}

namespace {
ad::Tensor apply_mask(const ad::Tensor& x, std::span<const std::uint8_t> masked) {
  if (masked.empty() || std::none_of(masked.begin(), masked.end(), [](auto m) { return m != 0; })) return x;
  ad::Matrix keep(x.rows(), x.cols(), 1.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (!masked[r]) continue;
    for (std::size_t c = 0; c < x.cols(); ++c) keep(r, c) = 0.0;
  }
  return ad::mul(x, ad::Tensor::constant(std::move(keep)));
}
}  // namespace

ad::Tensor PsiModel::encode_view(const SubgraphView& view, const ForwardContext& ctx, int encoder) const {
  auto x = apply_mask(table_.lookup(view.nodes), view.masked);
  return this->encoder(encoder).forward(x, view.local(), ctx);
}

ad::Tensor PsiModel::encode_corrupted(const SubgraphView& view, const ForwardContext& ctx, Rng& rng,
                                      int encoder) const {
  auto x = apply_mask(table_.lookup(view.nodes), view.masked);
  return this->encoder(encoder).forward(shuffle_negatives(x, rng), view.local(), ctx);
}

ad::Tensor PsiModel::summarize(const ad::Tensor& h, const ForwardContext& ctx, int readout) const {
  const auto& r = readout == 0 ? readout_ : readout2_;
  if (!r) throw std::logic_error("model has no readout " + std::to_string(readout));
  return r->forward(h, ctx);
}

ad::Tensor PsiModel::augmented_summary(const SubgraphRecord& record, const ForwardContext& ctx, Rng& rng) const {
  static constexpr AugmentKind kKinds[] = {AugmentKind::kNodeDrop, AugmentKind::kEdgePerturb,
                                           AugmentKind::kAttrMask};
  std::uniform_int_distribution<int> pick(0, 2);
  Augmentor aug;
  aug.kind = kKinds[pick(rng)];
  aug.p = config_.aug_p;
  return summarize(encode_view(aug.apply(full_view(record), rng), ctx, 0), ctx, 0);
}

KhopResult PsiModel::khop_forward(const SubgraphRecord& record, const PartialSubgraph& partial,
                                  const ad::Tensor& s_obs, Rng& rng, StepMode mode) const {
  if (config_.variant != Variant::kKhop) throw std::logic_error("khop_forward on a non k-hop model");
  KhopOptions opts = config_.khop;
  if (mode != StepMode::kTraining) opts.edge_drop = 0.0;
  KhopResult out;
  out.partition = khop_partition(*graph_, record, partial.observed_ids, opts, rng);
  const auto& part = out.partition;

  SubgraphView view;
  view.nodes = partial.observed_ids;
  view.nodes.insert(view.nodes.end(), part.neighbors.begin(), part.neighbors.end());
  view.edges = part.edges_khop;
  const auto ctx = forward_context(mode, rng);
  auto h = encode_view(view, ctx, 0);
  auto d = disc_.score(h, s_obs);

  const std::size_t n_obs = partial.observed_ids.size();
  std::vector<std::size_t> rows(view.nodes.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (!config_.khop_score_observed && !part.neighbors.empty()) rows.erase(rows.begin(), rows.begin() + n_obs);
  out.scored_ids.reserve(rows.size());
  for (auto r : rows) out.scored_ids.push_back(view.nodes[r]);

  const bool all_rows = rows.size() == view.nodes.size();
  auto d_scored = all_rows ? d : ad::gather_rows(d, rows);
  auto h_scored = all_rows ? h : ad::gather_rows(h, rows);
  auto pooled = khop_pool(d_scored, h_scored, out.scored_ids, config_.pool_ratio,
                          [&](const ad::Tensor& t) { return khop_mlp_.forward(t, ctx); });
  out.summary = pooled.summary;
  for (auto r : pooled.selected) out.selected.push_back(rows[r]);

  if (mode != StepMode::kInference) {
    std::unordered_set<NodeId> inside(part.in_subgraph.begin(), part.in_subgraph.end());
    std::vector<std::size_t> pos, neg;
    for (std::size_t r = 0; r < view.nodes.size(); ++r) {
      if (r < n_obs || inside.contains(view.nodes[r])) {
        pos.push_back(r);
      } else {
        neg.push_back(r);
      }
    }
    out.loss = khop_loss(ad::gather_rows(d, pos), neg.empty() ? ad::Tensor() : ad::gather_rows(d, neg));
  }
  return out;
}

ad::Tensor PsiModel::variant_loss(Variant variant, const SubgraphRecord& record, const PartialSubgraph& partial,
                                  const ad::Tensor& s, const Discriminator& disc, BatchContext* batch,
                                  std::size_t position, const ForwardContext& ctx, Rng& rng) const {
  const bool cached = batch != nullptr && position < batch->size() && &batch->record(position) == &record;
  auto full_encoding = [&]() {
    return cached ? batch->full_encoding(position) : encode_view(full_view(record), ctx, 0);
  };
  switch (variant) {
    case Variant::kDgi: {
      auto h = full_encoding();
      auto neg = encode_corrupted(full_view(record), ctx, rng, 0);
      return gd_loss(disc.score(h, s), disc.score(neg, s));
    }
    case Variant::kInfoGraph: {
      if (!cached || batch->size() < 2) {
        throw std::invalid_argument("ps-infograph training needs a batch of at least 2 subgraphs for negatives");
      }
      return gd_loss(disc.score(batch->full_encoding(position), s), disc.score(batch->other_encodings(position), s));
    }
    case Variant::kMvgrl: {
      const auto raw = full_view(record);
      const auto diffused = ppr_diffusion(raw, config_.ppr);
      auto s_diffused = summarize(encode_view(ppr_diffusion(partial_view(partial), config_.ppr), ctx, 1), ctx, 1);
      auto h_raw = full_encoding();
      auto h_diffused = encode_view(diffused, ctx, 1);
      auto neg_raw = encode_corrupted(raw, ctx, rng, 0);
      auto neg_diffused = encode_corrupted(diffused, ctx, rng, 1);
      return ad::add(gd_loss(disc.score(h_raw, s_diffused), disc.score(neg_raw, s_diffused)),
                     gd_loss(disc.score(h_diffused, s), disc.score(neg_diffused, s)));
    }
    case Variant::kGraphCl: {
      if (!cached || batch->size() < 2) {
        throw std::invalid_argument("ps-graphcl training needs a batch of at least 2 subgraphs for negatives");
      }
      auto pos = disc.score(batch->augmented_summary(position), s);
      std::vector<ad::Tensor> neg_scores;
      for (const auto& other : batch->other_summaries(position)) neg_scores.push_back(disc.score(other, s));
      ad::Tensor neg = neg_scores.front();
      for (std::size_t j = 1; j < neg_scores.size(); ++j) neg = ad::concat_cols(neg, neg_scores[j]);
      return infonce_loss(pos, neg);
    }
    case Variant::kBaseline:
    case Variant::kKhop:
      break;
  }
  throw std::logic_error("no single-model InfoMax loss for " + std::string(variant_name(variant)));
}

StepOutput PsiModel::step(const SubgraphRecord& record, const PartialSubgraph& partial, BatchContext* batch,
                          std::size_t batch_position, Rng& rng, StepMode mode) const {
  if (record.label < 0 || static_cast<std::size_t>(record.label) >= config_.num_classes) {
    throw std::invalid_argument("label " + std::to_string(record.label) + " outside 0.." +
                                std::to_string(config_.num_classes - 1));
  }
  const auto ctx = forward_context(mode, rng);
  auto s_obs = summarize(encode_view(partial_view(partial), ctx, 0), ctx, 0);

  std::optional<ad::Tensor> g;
  if (config_.subgraph_feature_dim > 0) {
    if (!record.subgraph_feature || record.subgraph_feature->size() != config_.subgraph_feature_dim) {
      throw std::invalid_argument("record lacks a subgraph feature of length " +
                                  std::to_string(config_.subgraph_feature_dim));
    }
    g = ad::Tensor::constant(ad::Matrix::row(*record.subgraph_feature));
  }

  StepOutput out;
  const bool training = mode != StepMode::kInference;
  if (config_.variant == Variant::kKhop) {
    auto khop = khop_forward(record, partial, s_obs, rng, mode);
    auto input = config_.concat_obs_summary ? ad::concat_cols(khop.summary, s_obs) : khop.summary;
    out.logits = head_.logits(input, g);
    if (training) {
      out.loss_khop = khop.loss;
      if (config_.second) {
        out.loss_second = variant_loss(*config_.second, record, partial, khop.summary, disc2_, batch,
                                       batch_position, ctx, rng);
      }
    }
  } else {
    out.logits = head_.logits(s_obs, g);
    if (training && config_.variant != Variant::kBaseline) {
      out.loss_infomax = variant_loss(config_.variant, record, partial, s_obs, disc_, batch, batch_position, ctx, rng);
    }
  }
  if (training) {
    auto log_probs = ad::log_softmax_rows(out.logits);
    out.loss_graph = ad::scale(ad::pick(log_probs, 0, static_cast<std::size_t>(record.label)), -1.0);
    out.total = compose_total(out, config_.weights);
  }
  return out;
}

PsiModel::BatchOutput PsiModel::batch_step(std::span<const SubgraphRecord* const> records,
                                           std::span<const PartialSubgraph> partials, Rng& rng,
                                           StepMode mode) const {
  if (mode == StepMode::kInference) throw std::invalid_argument("batch_step computes training losses");
  if (records.empty() || records.size() != partials.size()) {
    throw std::invalid_argument("batch_step needs one partial per record and a nonempty batch");
  }
  BatchContext batch(*this, {records.begin(), records.end()}, forward_context(mode, rng), rng);
  BatchOutput out;
  ad::Tensor sum;
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.steps.push_back(step(*records[i], partials[i], &batch, i, rng, mode));
    const auto& total = *out.steps.back().total;
    sum = sum.defined() ? ad::add(sum, total) : total;
  }
  out.loss = ad::scale(sum, 1.0 / static_cast<double>(records.size()));
  return out;
}

ad::Tensor PsiModel::predict(const SubgraphRecord& record, const PartialSubgraph& partial, Rng& rng) const {
  return step(record, partial, nullptr, 0, rng, StepMode::kInference).logits;
}

}  // namespace psi
