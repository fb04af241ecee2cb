#include "psi/testing/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "psi/infomax.hpp"
#include "psi/nn.hpp"
#include "psi/optim.hpp"

namespace psi::testing {

std::vector<NodeId> bfs_khop_oracle(const GlobalGraph& graph, std::span<const NodeId> observed, int k) {
  std::vector<std::vector<NodeId>> adj(graph.num_nodes());
  for (const auto& e : graph.edges()) {
    adj[e.src].push_back(e.dst);
    adj[e.dst].push_back(e.src);
  }
  std::vector<int> dist(graph.num_nodes(), -1);
  std::deque<NodeId> queue;
  for (auto v : observed) {
    if (dist[v] < 0) {
      dist[v] = 0;
      queue.push_back(v);
    }
  }
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    if (dist[v] == k) continue;
    for (auto u : adj[v]) {
      if (dist[u] < 0) {
        dist[u] = dist[v] + 1;
        queue.push_back(u);
      }
    }
  }
  std::vector<NodeId> out;
  for (std::size_t v = 0; v < dist.size(); ++v) {
    if (dist[v] > 0) out.push_back(static_cast<NodeId>(v));
  }
  return out;
}

GlobalGraph random_graph(std::size_t n, double p, Rng& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && coin(rng)) edges.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j)});
    }
  }
  return GlobalGraph(n, std::move(edges));
}

namespace {

ad::Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  ad::Matrix m(rows, cols);
  for (auto& x : m.data()) x = u(rng);
  return m;
}

/// Entries with magnitude in [0.1, 1] so ReLU kinks sit far from every
/// finite-difference probe.
ad::Matrix away_from_zero(std::size_t rows, std::size_t cols, Rng& rng) {
  auto m = random_matrix(rows, cols, rng, 0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (auto& x : m.data()) x = sign(rng) ? x : -x;
  return m;
}

std::string shape_of(const ad::Tensor& t) { return ad::shape_string(t.rows(), t.cols()); }

CheckResult run_check(const std::string& name, std::vector<ad::Tensor> params,
                      const std::function<ad::Tensor()>& fn, double tolerance) {
  CheckResult r;
  r.name = name;
  try {
    r.value = finite_diff_check(fn, params);
    r.passed = r.value < tolerance;
    std::ostringstream d;
    d << "max relative error " << r.value;
    if (!params.empty()) d << " (first input " << shape_of(params.front()) << ")";
    r.detail = d.str();
  } catch (const std::exception& e) {
    r.passed = false;
    r.value = std::numeric_limits<double>::infinity();
    r.detail = e.what();
  }
  return r;
}

/// sum(out * R) for a fixed random R, so every output entry gets its own
/// upstream gradient.
ad::Tensor weighted_sum(const ad::Tensor& out, const ad::Matrix& r) {
  return ad::sum(ad::mul(out, ad::Tensor::constant(r)));
}

}  // namespace

ToyInstance make_toy_instance(std::size_t num_nodes, std::uint64_t seed) {
  if (num_nodes < 8) throw std::invalid_argument("toy instance needs at least 8 nodes");
  Rng rng(seed);
  ToyInstance toy;
  // A ring keeps every node reachable; random chords add variety.
  std::vector<Edge> edges;
  std::bernoulli_distribution chord(0.2);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    edges.push_back({static_cast<NodeId>(i), static_cast<NodeId>((i + 1) % num_nodes)});
    for (std::size_t j = i + 2; j < num_nodes; ++j) {
      if (chord(rng)) edges.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j)});
    }
  }
  toy.graph = GlobalGraph(num_nodes, std::move(edges), true);
  std::vector<NodeId> all(num_nodes);
  for (std::size_t i = 0; i < num_nodes; ++i) all[i] = static_cast<NodeId>(i);
  const std::size_t size = std::max<std::size_t>(4, num_nodes / 3);
  for (int r = 0; r < 3; ++r) {
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<NodeId> ids(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(size));
    std::sort(ids.begin(), ids.end());
    toy.records.push_back(make_record(toy.graph, ids, r % 2));
    std::vector<NodeId> observed(ids.begin(), ids.begin() + 3);
    std::shuffle(observed.begin(), observed.end(), rng);
    toy.partials.push_back(induced_partial_subgraph(toy.records.back(), observed, static_cast<std::size_t>(r)));
  }
  toy.features = random_matrix(num_nodes, 5, rng);
  return toy;
}

std::vector<CheckResult> op_gradient_checks(std::uint64_t seed, double tolerance) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> dim(1, 16);
  std::vector<CheckResult> out;
  using ad::Tensor;
  const auto param = [](ad::Matrix m) { return Tensor::parameter(std::move(m)); };

  const std::size_t n = dim(rng), m = dim(rng), k = dim(rng);
  const auto R_nm = random_matrix(n, m, rng);
  const auto R_nk = random_matrix(n, k, rng);

  {
    auto a = param(random_matrix(n, m, rng)), b = param(random_matrix(m, k, rng));
    out.push_back(run_check("matmul", {a, b}, [=] { return weighted_sum(ad::matmul(a, b), R_nk); }, tolerance));
  }
  {
    auto a = param(random_matrix(n, m, rng)), b = param(random_matrix(n, m, rng));
    auto row = param(random_matrix(1, m, rng));
    out.push_back(run_check("add", {a, b}, [=] { return weighted_sum(ad::add(a, b), R_nm); }, tolerance));
    out.push_back(run_check("add_broadcast", {a, row}, [=] { return weighted_sum(ad::add(a, row), R_nm); },
                            tolerance));
    out.push_back(run_check("sub", {a, b}, [=] { return weighted_sum(ad::sub(a, b), R_nm); }, tolerance));
    out.push_back(run_check("mul", {a, b}, [=] { return weighted_sum(ad::mul(a, b), R_nm); }, tolerance));
    out.push_back(run_check("scale", {a}, [=] { return weighted_sum(ad::scale(a, -1.7), R_nm); }, tolerance));
    // a appears on both sides; the gradient is the sum of both paths.
    out.push_back(run_check("shared_parameter", {a, b}, [=] { return weighted_sum(ad::mul(a, ad::add(a, b)), R_nm); },
                            tolerance));
  }
  {
    auto a = param(away_from_zero(n, m, rng));
    out.push_back(run_check("relu", {a}, [=] { return weighted_sum(ad::relu(a), R_nm); }, tolerance));
  }
  {
    auto a = param(random_matrix(n, m, rng, -3.0, 3.0));
    out.push_back(run_check("sigmoid", {a}, [=] { return weighted_sum(ad::sigmoid(a), R_nm); }, tolerance));
    out.push_back(run_check("exp", {a}, [=] { return weighted_sum(ad::exp(a), R_nm); }, tolerance));
    out.push_back(run_check("softplus", {a}, [=] { return weighted_sum(ad::softplus(a), R_nm); }, tolerance));
    out.push_back(
        run_check("softmax_rows", {a}, [=] { return weighted_sum(ad::softmax_rows(a), R_nm); }, tolerance));
    out.push_back(
        run_check("log_softmax_rows", {a}, [=] { return weighted_sum(ad::log_softmax_rows(a), R_nm); }, tolerance));
    const auto r_col = random_matrix(n, 1, rng);
    out.push_back(
        run_check("logsumexp_rows", {a}, [=] { return weighted_sum(ad::logsumexp_rows(a), r_col); }, tolerance));
    const auto r_row = random_matrix(1, m, rng);
    out.push_back(run_check("mean_rows", {a}, [=] { return weighted_sum(ad::mean_rows(a), r_row); }, tolerance));
    out.push_back(run_check("sum", {a}, [=] { return ad::sum(ad::mul(a, a)); }, tolerance));
    out.push_back(run_check("mean", {a}, [=] { return ad::mean(ad::mul(a, a)); }, tolerance));
    const auto r_t = random_matrix(m, n, rng);
    out.push_back(run_check("transpose", {a}, [=] { return weighted_sum(ad::transpose(a), r_t); }, tolerance));
    out.push_back(run_check("normalize_rows", {a}, [=] { return weighted_sum(ad::normalize_rows(a), R_nm); },
                            tolerance));
    const std::size_t r = n / 2, c = m / 2;
    out.push_back(run_check("pick", {a}, [=] { return ad::mul(ad::pick(a, r, c), ad::pick(a, 0, 0)); }, tolerance));
    out.push_back(run_check(
        "dropout", {a},
        [=] {
          Rng local(seed + 17);
          return weighted_sum(ad::dropout(a, 0.3, local, true), R_nm);
        },
        tolerance));
  }
  {
    auto a = param(random_matrix(n, m, rng, 0.2, 3.0));
    out.push_back(run_check("log", {a}, [=] { return weighted_sum(ad::log(a), R_nm); }, tolerance));
  }
  {
    auto a = param(random_matrix(n, m, rng)), b = param(random_matrix(n, k, rng));
    const auto r = random_matrix(n, m + k, rng);
    out.push_back(run_check("concat_cols", {a, b}, [=] { return weighted_sum(ad::concat_cols(a, b), r); }, tolerance));
    auto c = param(random_matrix(k, m, rng));
    const auto r2 = random_matrix(n + k, m, rng);
    out.push_back(run_check(
        "concat_rows", {a, c},
        [=] {
          std::vector<Tensor> parts{a, c};
          return weighted_sum(ad::concat_rows(parts), r2);
        },
        tolerance));
    std::vector<std::size_t> rows;
    std::uniform_int_distribution<std::size_t> pick_row(0, n - 1);
    for (std::size_t i = 0; i < k + 2; ++i) rows.push_back(pick_row(rng));  // repeats on purpose
    const auto r3 = random_matrix(rows.size(), m, rng);
    out.push_back(
        run_check("gather_rows", {a}, [=] { return weighted_sum(ad::gather_rows(a, rows), r3); }, tolerance));
  }
  {
    auto agg = std::make_shared<ad::Aggregation>();
    agg->num_targets = k;
    agg->num_sources = n;
    agg->offsets.push_back(0);
    std::uniform_int_distribution<std::uint32_t> src(0, static_cast<std::uint32_t>(n - 1));
    std::uniform_int_distribution<int> deg(0, 4);
    std::uniform_real_distribution<double> w(0.1, 1.0);
    for (std::size_t t = 0; t < k; ++t) {
      const int d = deg(rng);
      for (int j = 0; j < d; ++j) {
        agg->sources.push_back(src(rng));
        agg->weights.push_back(w(rng));
      }
      agg->offsets.push_back(agg->sources.size());
    }
    auto a = param(random_matrix(n, m, rng));
    const auto r = random_matrix(k, m, rng);
    std::shared_ptr<const ad::Aggregation> cagg = agg;
    out.push_back(run_check("aggregate", {a}, [=] { return weighted_sum(ad::aggregate(a, cagg), r); }, tolerance));
  }
  {
    auto pos = param(random_matrix(n, 1, rng, -3.0, 3.0));
    auto neg = param(random_matrix(k, 1, rng, -3.0, 3.0));
    out.push_back(run_check("gd_loss", {pos, neg}, [=] { return gd_loss(pos, neg); }, tolerance));
    out.push_back(run_check("khop_loss", {pos, neg}, [=] { return khop_loss(pos, neg); }, tolerance));
    auto negs = param(random_matrix(n, k, rng, -3.0, 3.0));
    out.push_back(run_check("infonce_loss", {pos, negs}, [=] { return infonce_loss(pos, negs); }, tolerance));
  }

  // Modules on their own, with small widths.
  {
    ParameterStore store;
    const std::size_t f = 6;
    const auto toy = make_toy_instance(10, seed + 1);
    SageEncoder enc(store, "enc", SageConfig{5, f, 2, true, false}, rng);
    SageEncoder bienc(store, "bienc", SageConfig{5, f, 2, true, true}, rng);
    auto table = EmbeddingTable::trainable(store, "x", toy.graph.num_nodes(), 5, rng);
    const auto& rec = toy.records.front();
    ForwardContext ctx;
    const auto r = random_matrix(rec.node_ids.size(), f, rng);
    out.push_back(run_check("sage_encoder", store.tensors(),
                            [&, r] { return weighted_sum(enc.encode(table, rec.node_ids, rec.edge_pairs, ctx), r); },
                            tolerance));
    out.push_back(run_check(
        "sage_encoder_bidirectional", store.tensors(),
        [&, r] { return weighted_sum(bienc.encode(table, rec.node_ids, rec.edge_pairs, ctx), r); }, tolerance));

    ParameterStore rs;
    auto h = rs.add("h", random_matrix(5, f, rng));
    MeanMlpReadout mean_ro(rs, "mean", f, rng);
    GatedAttentionReadout att(rs, "att", AttentionReadoutConfig{f, PreMixer::kMlp, false, 20}, rng);
    GatedAttentionReadout att_pe(rs, "att_pe", AttentionReadoutConfig{f, PreMixer::kSelfAttention, true, 20}, rng);
    GatedAttentionReadout att_none(rs, "att_none", AttentionReadoutConfig{f, PreMixer::kNone, false, 20}, rng);
    auto bil = Discriminator::bilinear(rs, "bil", f, rng);
    auto cos = Discriminator::cosine(0.2);
    PredictionHead head(rs, "head", f, 3, 4, rng);
    auto s = rs.add("s", random_matrix(1, f, rng));
    auto g = rs.add("g", random_matrix(1, 4, rng));
    const auto r1 = random_matrix(1, f, rng);
    const auto r5 = random_matrix(5, 1, rng);
    const auto r3 = random_matrix(1, 3, rng);
    out.push_back(run_check("mean_mlp_readout", rs.tensors(), [&, r1] { return weighted_sum(mean_ro.forward(h, ctx), r1); },
                            tolerance));
    out.push_back(run_check("attention_readout", rs.tensors(), [&, r1] { return weighted_sum(att.forward(h, ctx), r1); },
                            tolerance));
    out.push_back(run_check("attention_readout_pe_selfattn", rs.tensors(),
                            [&, r1] { return weighted_sum(att_pe.forward(h, ctx), r1); }, tolerance));
    out.push_back(run_check("attention_readout_no_premix", rs.tensors(),
                            [&, r1] { return weighted_sum(att_none.forward(h, ctx), r1); }, tolerance));
    out.push_back(run_check("bilinear_discriminator", rs.tensors(), [&, r5] { return weighted_sum(bil.score(h, s), r5); },
                            tolerance));
    out.push_back(run_check("cosine_discriminator", rs.tensors(), [&, r5] { return weighted_sum(cos.score(h, s), r5); },
                            tolerance));
    out.push_back(run_check("prediction_head", rs.tensors(), [&, r3] { return weighted_sum(head.logits(s, g), r3); },
                            tolerance));
    const std::vector<NodeId> ids{4, 1, 3, 0, 2};
    auto d = rs.add("d", random_matrix(5, 1, rng));
    Mlp2 pool_mlp(rs, "pool_mlp", f, f, f, rng);
    out.push_back(run_check(
        "khop_pool", rs.tensors(),
        [&, r1] {
          auto pooled = khop_pool(d, h, ids, 0.6, [&](const ad::Tensor& x) { return pool_mlp.forward(x, ctx); });
          return weighted_sum(pooled.summary, r1);
        },
        tolerance));
  }
  return out;
}

std::vector<std::pair<std::string, ModelConfig>> gradient_check_models(std::size_t input_dim) {
  ModelConfig base;
  base.input_dim = input_dim;
  base.hidden_dim = 6;
  base.num_classes = 2;
  base.pool_ratio = 0.5;
  base.khop.cap = std::nullopt;
  base.ppr.top_t = 4;
  std::vector<std::pair<std::string, ModelConfig>> out;
  const auto with = [&](const std::string& name, Variant v, std::optional<Variant> second = std::nullopt) {
    auto c = base;
    c.variant = v;
    c.second = second;
    out.emplace_back(name, c);
    return &out.back().second;
  };
  with("baseline", Variant::kBaseline);
  with("ps-dgi", Variant::kDgi);
  with("ps-infograph", Variant::kInfoGraph);
  with("ps-mvgrl", Variant::kMvgrl);
  with("ps-graphcl", Variant::kGraphCl);
  with("khop", Variant::kKhop);
  with("khop+ps-dgi", Variant::kKhop, Variant::kDgi);
  with("khop+ps-infograph", Variant::kKhop, Variant::kInfoGraph);
  auto* pe = with("khop+ps-infograph/pe-selfattn-concat", Variant::kKhop, Variant::kInfoGraph);
  pe->use_positional_encoding = true;
  pe->premixer = PreMixer::kSelfAttention;
  pe->concat_obs_summary = true;
  auto* bi = with("ps-infograph/bidirectional-attention", Variant::kInfoGraph);
  bi->bidirectional = true;
  bi->readout = ReadoutKind::kAttention;
  return out;
}

std::vector<CheckResult> model_gradient_checks(std::uint64_t seed, std::size_t num_nodes, double tolerance) {
  const auto toy = make_toy_instance(num_nodes, seed);
  std::vector<const SubgraphRecord*> records;
  for (const auto& r : toy.records) records.push_back(&r);
  std::vector<CheckResult> out;
  for (const auto& [name, config] : gradient_check_models(toy.features.cols())) {
    // Trainable embeddings for the plain models so the table is checked too.
    const bool frozen = config.variant == Variant::kKhop;
    PsiModel model(config, toy.graph, frozen ? std::optional<ad::Matrix>(toy.features) : std::nullopt,
                   derive_seed(seed, {7}));
    out.push_back(run_check(name, model.parameters().tensors(), [&] {
      Rng rng(derive_seed(seed, {11}));
      return model.batch_step(records, toy.partials, rng, StepMode::kTrainingNoDropout).loss;
    }, tolerance));
  }
  return out;
}

CheckResult khop_oracle_check(std::size_t graphs, std::size_t max_nodes, std::uint64_t seed) {
  Rng rng(seed);
  CheckResult r;
  r.name = "khop_vs_bfs";
  std::uniform_int_distribution<std::size_t> size(2, max_nodes);
  std::uniform_int_distribution<int> hops(1, 3);
  std::uniform_real_distribution<double> degree(0.5, 4.0);
  std::size_t mismatches = 0;
  std::string first;
  for (std::size_t g = 0; g < graphs; ++g) {
    const std::size_t n = size(rng);
    const auto graph = random_graph(n, std::min(1.0, degree(rng) / static_cast<double>(n)), rng);
    std::uniform_int_distribution<std::size_t> obs_count(1, std::min<std::size_t>(n, 8));
    std::vector<NodeId> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<NodeId>(i);
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<NodeId> observed(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(obs_count(rng)));
    const int k = hops(rng);
    KhopOptions opts;
    opts.k = k;
    opts.cap = std::nullopt;
    Rng unused(0);
    const auto got = khop_neighbors(graph, observed, opts, unused);
    const auto want = bfs_khop_oracle(graph, observed, k);
    // Edges of the global graph induced on observed + neighbors.
    std::set<NodeId> keep(observed.begin(), observed.end());
    keep.insert(want.begin(), want.end());
    std::vector<Edge> want_edges;
    for (const auto& e : graph.edges()) {
      if (keep.contains(e.src) && keep.contains(e.dst)) want_edges.push_back(e);
    }
    auto got_edges = got.edges_khop;
    std::sort(got_edges.begin(), got_edges.end());
    if (got.neighbors != want || got_edges != want_edges) {
      if (mismatches++ == 0) {
        first = "graph " + std::to_string(g) + " (n=" + std::to_string(n) + ", k=" + std::to_string(k) + ")";
      }
    }
  }
  r.value = static_cast<double>(mismatches);
  r.passed = mismatches == 0;
  r.detail = std::to_string(graphs - mismatches) + "/" + std::to_string(graphs) + " graphs match" +
             (first.empty() ? "" : "; first mismatch: " + first);
  return r;
}

CheckResult cgd_bound_check(std::size_t instances, std::uint64_t seed) {
  Rng rng(seed);
  CheckResult r;
  r.name = "cgd_bound";
  std::size_t violations = 0;
  double worst_gap = -std::numeric_limits<double>::infinity();
  std::uniform_real_distribution<double> scale(0.1, 4.0);
  for (std::size_t i = 0; i < instances; ++i) {
    const auto inst = random_cgd_instance(8, scale(rng), rng);
    const auto res = verify_cgd_bound(inst.f, inst.p_xy);
    worst_gap = std::max(worst_gap, res.i_cgd - res.i_gd);
    if (!res.holds) ++violations;
  }
  r.value = static_cast<double>(violations);
  r.passed = violations == 0 && instances > 0;
  std::ostringstream d;
  d << instances - violations << "/" << instances << " instances hold; max I_CGD - I_GD = " << worst_gap;
  r.detail = d.str();
  return r;
}

}  // namespace psi::testing
