#include "psi/nn.hpp"

#include <cmath>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace psi {

ad::Tensor ForwardContext::drop(const ad::Tensor& x) const {
  if (!dropout_active || dropout_p == 0.0 || rng == nullptr) return x;
  return ad::dropout(x, dropout_p, *rng, true);
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
               Rng& rng, bool bias)
    : in_(in), out_(out) {
  weight_ = store.add_uniform(name + ".weight", in, out, in, rng);
  if (bias) bias_ = store.add_uniform(name + ".bias", 1, out, in, rng);
}

ad::Tensor Linear::forward(const ad::Tensor& x) const {
  auto y = ad::matmul(x, weight_);
  return bias_.defined() ? ad::add(y, bias_) : y;
}

Mlp2::Mlp2(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden,
           std::size_t out, Rng& rng)
    : first_(store, name + ".0", in, hidden, rng), second_(store, name + ".1", hidden, out, rng) {}

ad::Tensor Mlp2::forward(const ad::Tensor& x, const ForwardContext& ctx) const {
  return second_.forward(ctx.drop(ad::relu(first_.forward(x))));
}

EmbeddingTable EmbeddingTable::trainable(ParameterStore& store, const std::string& name,
                                         std::size_t rows, std::size_t cols, Rng& rng) {
  EmbeddingTable t;
  t.table_ = store.add_uniform(name, rows, cols, cols, rng);
  return t;
}

EmbeddingTable EmbeddingTable::frozen(ad::Matrix values) {
  EmbeddingTable t;
  t.table_ = ad::Tensor::constant(std::move(values));
  return t;
}

ad::Tensor EmbeddingTable::lookup(std::span<const NodeId> ids) const {
  std::vector<std::size_t> rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= table_.rows()) {
      throw std::invalid_argument("embedding lookup: node id " + std::to_string(ids[i]) +
                                  " >= table rows " + std::to_string(table_.rows()));
    }
    rows[i] = ids[i];
  }
  return ad::gather_rows(table_, rows);
}

std::shared_ptr<const ad::Aggregation> mean_aggregation(const LocalGraph& graph, bool reverse) {
  auto agg = std::make_shared<ad::Aggregation>();
  const auto n = graph.size();
  agg->num_targets = n;
  agg->num_sources = n;
  agg->offsets.assign(n + 1, 0);
  for (const auto& [s, d] : graph.edges) ++agg->offsets[(reverse ? s : d) + 1];
  for (std::size_t v = 0; v < n; ++v) agg->offsets[v + 1] += agg->offsets[v];
  agg->sources.resize(graph.edges.size());
  agg->weights.resize(graph.edges.size());
  std::vector<std::size_t> fill(agg->offsets.begin(), agg->offsets.end() - 1);
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    const auto [s, d] = graph.edges[i];
    const auto target = reverse ? s : d;
    const auto source = reverse ? d : s;
    const auto slot = fill[target]++;
    agg->sources[slot] = source;
    agg->weights[slot] = graph.weights.empty() ? 1.0 : graph.weights[i];
  }
  for (std::size_t v = 0; v < n; ++v) {
    double total = 0.0;
    for (auto j = agg->offsets[v]; j < agg->offsets[v + 1]; ++j) total += agg->weights[j];
    if (total <= 0.0) continue;
    for (auto j = agg->offsets[v]; j < agg->offsets[v + 1]; ++j) agg->weights[j] /= total;
  }
  return agg;
}

SageEncoder::SageEncoder(ParameterStore& store, const std::string& name, const SageConfig& config,
                         Rng& rng)
    : config_(config) {
  if (config.layers < 1) throw std::invalid_argument("encoder needs at least one layer");
  if (config.in_dim == 0 || config.hidden_dim == 0) throw std::invalid_argument("encoder widths must be > 0");
  if (config.bidirectional && config.hidden_dim % 2 != 0) {
    throw std::invalid_argument("bidirectional encoder needs an even hidden width");
  }
  const std::size_t width = config.bidirectional ? config.hidden_dim / 2 : config.hidden_dim;
  auto build = [&](std::vector<Layer>& stack, const std::string& prefix) {
    std::size_t in = config.in_dim;
    for (int l = 0; l < config.layers; ++l) {
      const auto lname = prefix + ".layer" + std::to_string(l);
      Layer layer{Linear(store, lname + ".self", in, width, rng, true),
                  Linear(store, lname + ".neigh", in, width, rng, false), std::nullopt};
      if (config.skip && in != width) {
        layer.skip_projection.emplace(store, lname + ".skip", in, width, rng, false);
      }
      stack.push_back(std::move(layer));
      in = width;
    }
  };
  build(forward_, config.bidirectional ? name + ".fwd" : name);
  if (config.bidirectional) build(reverse_, name + ".rev");
}

ad::Tensor SageEncoder::run_stack(std::span<const Layer> stack, ad::Tensor h,
                                  const std::shared_ptr<const ad::Aggregation>& agg,
                                  const ForwardContext& ctx) const {
  for (const auto& layer : stack) {
    auto z = ad::add(layer.self.forward(h), layer.neigh.forward(ad::aggregate(h, agg)));
    auto out = ad::relu(z);
    if (config_.skip) {
      out = ad::add(out, layer.skip_projection ? layer.skip_projection->forward(h) : h);
    }
    h = ctx.drop(out);
  }
  return h;
}

ad::Tensor SageEncoder::forward(const ad::Tensor& x, const LocalGraph& graph,
                                const ForwardContext& ctx) const {
  if (x.rows() != graph.size() || x.cols() != config_.in_dim) {
    throw std::invalid_argument("encoder input " + ad::shape_string(x.rows(), x.cols()) +
                                " does not match " + std::to_string(graph.size()) + " nodes x " +
                                std::to_string(config_.in_dim) + " features");
  }
  auto out = run_stack(forward_, x, mean_aggregation(graph, false), ctx);
  if (!config_.bidirectional) return out;
  return ad::concat_cols(out, run_stack(reverse_, x, mean_aggregation(graph, true), ctx));
}

ad::Tensor SageEncoder::encode(const EmbeddingTable& table, std::span<const NodeId> node_ids,
                               std::span<const Edge> edges, const ForwardContext& ctx) const {
  const auto graph = make_local_graph(node_ids, edges);
  return forward(table.lookup(node_ids), graph, ctx);
}

MeanMlpReadout::MeanMlpReadout(ParameterStore& store, const std::string& name, std::size_t dim,
                               Rng& rng)
    : mlp_(store, name + ".mlp", dim, dim, dim, rng) {}

ad::Tensor MeanMlpReadout::forward(const ad::Tensor& h, const ForwardContext& ctx) const {
  if (h.rows() == 0) throw std::invalid_argument("readout of an empty node set");
  return ad::mean_rows(mlp_.forward(h, ctx));
}

ad::Matrix sinusoidal_encoding(std::size_t length, std::size_t dim) {
  ad::Matrix pe(length, dim);
  for (std::size_t p = 0; p < length; ++p) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(dim);
      const double angle = static_cast<double>(p) / std::pow(10000.0, exponent);
      pe(p, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

GatedAttentionReadout::GatedAttentionReadout(ParameterStore& store, const std::string& name,
                                             const AttentionReadoutConfig& config, Rng& rng)
    : config_(config) {
  const auto d = config.dim;
  switch (config.premixer) {
    case PreMixer::kNone:
      break;
    case PreMixer::kMlp:
      mlp_ = Mlp2(store, name + ".premix", d, d, d, rng);
      break;
    case PreMixer::kSelfAttention:
      query_ = Linear(store, name + ".query", d, d, rng, false);
      key_ = Linear(store, name + ".key", d, d, rng, false);
      value_ = Linear(store, name + ".value", d, d, rng, false);
      break;
  }
  gate_ = Linear(store, name + ".gate", d, d, rng);
  feat_ = Linear(store, name + ".feat", d, d, rng);
}

ad::Tensor GatedAttentionReadout::premix(const ad::Tensor& h, const ForwardContext& ctx) const {
  switch (config_.premixer) {
    case PreMixer::kNone:
      return h;
    case PreMixer::kMlp:
      return mlp_.forward(h, ctx);
    case PreMixer::kSelfAttention: {
      auto q = query_.forward(h);
      auto k = key_.forward(h);
      auto attn = ad::softmax_rows(
          ad::scale(ad::matmul(q, ad::transpose(k)), 1.0 / std::sqrt(static_cast<double>(config_.dim))));
      return ad::add(h, ad::matmul(attn, value_.forward(h)));
    }
  }
  return h;
}

ad::Tensor GatedAttentionReadout::forward(const ad::Tensor& h, const ForwardContext& ctx) const {
  if (h.rows() == 0) throw std::invalid_argument("readout of an empty node set");
  if (h.cols() != config_.dim) {
    throw std::invalid_argument("attention readout expects width " + std::to_string(config_.dim) +
                                ", got " + std::to_string(h.cols()));
  }
  ad::Tensor x = h;
  if (config_.positional) {
    if (h.rows() > config_.max_length) {
      throw std::invalid_argument("sequence of " + std::to_string(h.rows()) +
                                  " nodes exceeds the maximum positional length " +
                                  std::to_string(config_.max_length));
    }
    x = ad::add(x, ad::Tensor::constant(sinusoidal_encoding(h.rows(), config_.dim)));
  }
  auto mixed = premix(x, ctx);
  auto weights = ad::sigmoid(gate_.forward(mixed));
  auto pooled = ad::mul(weights, feat_.forward(mixed));
  // Column sum as a 1 x n ones-row product keeps this a single op.
  return ad::matmul(ad::Tensor::constant(ad::Matrix(1, h.rows(), 1.0)), pooled);
}

Discriminator Discriminator::bilinear(ParameterStore& store, const std::string& name,
                                      std::size_t dim, Rng& rng) {
  Discriminator d;
  d.kind_ = DiscriminatorKind::kBilinear;
  d.weight_ = store.add_uniform(name + ".weight", dim, dim, dim, rng);
  return d;
}

Discriminator Discriminator::cosine(double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  Discriminator d;
  d.kind_ = DiscriminatorKind::kCosine;
  d.temperature_ = temperature;
  return d;
}

ad::Tensor Discriminator::score(const ad::Tensor& h, const ad::Tensor& s) const {
  if (s.rows() != 1 || h.cols() != s.cols()) {
    throw std::invalid_argument("discriminator: node rows " + ad::shape_string(h.rows(), h.cols()) +
                                " vs summary " + ad::shape_string(s.rows(), s.cols()));
  }
  if (kind_ == DiscriminatorKind::kBilinear) {
    if (weight_.rows() != h.cols()) {
      throw std::invalid_argument("bilinear weight width does not match inputs");
    }
    return ad::matmul(h, ad::matmul(weight_, ad::transpose(s)));
  }
  auto hn = ad::normalize_rows(h);
  auto sn = ad::normalize_rows(s);
  if (spdlog::should_log(spdlog::level::debug)) {
    bool zero = false;
    for (std::size_t r = 0; r < hn.rows() && !zero; ++r) {
      double sq = 0.0;
      for (double v : hn.value().row_span(r)) sq += v * v;
      zero = sq == 0.0;
    }
    if (zero) spdlog::debug("cosine discriminator: zero vector scored as 0");
  }
  return ad::scale(ad::matmul(hn, ad::transpose(sn)), 1.0 / temperature_);
}

PredictionHead::PredictionHead(ParameterStore& store, const std::string& name,
                               std::size_t summary_dim, std::size_t num_classes,
                               std::size_t subgraph_feature_dim, Rng& rng) {
  std::size_t in = summary_dim;
  if (subgraph_feature_dim > 0) {
    feature_transform_.emplace(store, name + ".g", subgraph_feature_dim, summary_dim, rng);
    in += summary_dim;
  }
  output_ = Linear(store, name + ".out", in, num_classes, rng);
}

ad::Tensor PredictionHead::logits(const ad::Tensor& s, const std::optional<ad::Tensor>& g) const {
  if (g.has_value() != feature_transform_.has_value()) {
    throw std::invalid_argument(g ? "subgraph feature given but the head has no feature path"
                                  : "head expects a subgraph feature");
  }
  if (!g) return output_.forward(s);
  return output_.forward(ad::concat_cols(s, feature_transform_->forward(*g)));
}

}  // namespace psi
