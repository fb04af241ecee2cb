#include <algorithm>
#include <stdexcept>
#include <unordered_set>

#include "psi/dataset.hpp"

namespace psi {

void SyntheticSpec::validate() const {
  if (num_nodes < 2) throw std::invalid_argument("synthetic graph needs at least 2 nodes");
  if (communities < 1 || communities > num_nodes) throw std::invalid_argument("communities must be in [1, num_nodes]");
  if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  if (communities < num_classes) throw std::invalid_argument("need at least one community per class");
  for (double p : {p_in, p_out, stay_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probabilities must be in [0, 1]");
  }
  if (!(noise >= 0.0)) throw std::invalid_argument("noise must be >= 0");
  if (min_size < 1 || min_size > max_size) throw std::invalid_argument("need 1 <= min_size <= max_size");
  const auto smallest = std::max(min_size, n_obs + 2);
  if (smallest > num_nodes || max_size > num_nodes) {
    throw std::invalid_argument("subgraph size exceeds the number of global nodes");
  }
}

DatasetBundle generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto n = spec.num_nodes;
  std::vector<std::size_t> community(n);
  std::vector<std::vector<NodeId>> members(spec.communities);
  for (std::size_t v = 0; v < n; ++v) {
    community[v] = v * spec.communities / n;
    members[community[v]].push_back(static_cast<NodeId>(v));
  }

  std::vector<Edge> edges;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      const double p = community[u] == community[v] ? spec.p_in : spec.p_out;
      if (unit(rng) < p) edges.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v)});
    }
  }

  DatasetBundle bundle;
  bundle.name = "synthetic";
  bundle.ordered = spec.ordered;
  bundle.graph = GlobalGraph(n, std::move(edges), true);
  bundle.num_classes = spec.num_classes;
  for (std::size_t c = 0; c < spec.num_classes; ++c) bundle.class_names.push_back(std::to_string(c));

  const auto min_size = std::max(spec.min_size, spec.n_obs + 2);
  const auto max_size = std::max(spec.max_size, min_size);
  std::uniform_int_distribution<std::size_t> pick_community(0, spec.communities - 1);
  std::uniform_int_distribution<std::size_t> pick_size(min_size, max_size);
  std::bernoulli_distribution stay(spec.stay_prob);

  for (std::size_t m = 0; m < spec.num_subgraphs; ++m) {
    const auto home = pick_community(rng);
    const auto target = pick_size(rng);
    const auto& pool = members[home];
    std::vector<NodeId> visited;
    std::unordered_set<NodeId> seen;
    auto visit = [&](NodeId v) {
      if (seen.insert(v).second) visited.push_back(v);
    };
    NodeId cur = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
    visit(cur);
    for (std::size_t steps = 0; visited.size() < target && steps < 100 * target; ++steps) {
      const auto nbrs = bundle.graph.out_neighbors(cur);
      if (nbrs.empty()) {
        cur = visited[std::uniform_int_distribution<std::size_t>(0, visited.size() - 1)(rng)];
        continue;
      }
      std::vector<NodeId> same;
      for (auto w : nbrs) {
        if (community[w] == home) same.push_back(w);
      }
      const auto& choices = (!same.empty() && stay(rng)) ? same : std::vector<NodeId>(nbrs.begin(), nbrs.end());
      cur = choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)];
      visit(cur);
    }
    // A walk stuck in a small component is topped up from the home
    // community, then from anywhere.
    for (std::size_t tries = 0; visited.size() < target && tries < 10 * n; ++tries) {
      const auto& from = tries < 5 * n ? pool : members[tries % spec.communities];
      visit(from[std::uniform_int_distribution<std::size_t>(0, from.size() - 1)(rng)]);
    }

    std::vector<std::size_t> counts(spec.communities, 0);
    for (auto v : visited) ++counts[community[v]];
    const auto majority = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    const int label = static_cast<int>(majority % spec.num_classes);
    bundle.records.push_back(make_record(bundle.graph, visited, label, spec.ordered));
  }

  const auto dim = spec.communities + spec.noise_dims;
  ad::Matrix features(n, dim);
  std::normal_distribution<double> gauss(0.0, spec.noise);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t c = 0; c < dim; ++c) {
      features(v, c) = (c == community[v] ? 1.0 : 0.0) + (spec.noise > 0.0 ? gauss(rng) : 0.0);
    }
  }
  bundle.features = std::move(features);
  bundle.splits = make_splits(bundle.records.size(), spec.ratios, derive_seed(spec.seed, {0x5b1175}));
  bundle.validate();
  return bundle;
}

}  // namespace psi
