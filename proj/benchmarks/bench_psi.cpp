#include <benchmark/benchmark.h>

#include "psi/harness.hpp"
#include "psi/testing/oracles.hpp"

using namespace psi;

namespace {

void BM_KhopNeighbors(benchmark::State& state) {
  Rng rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto graph = testing::random_graph(n, 8.0 / static_cast<double>(n), rng);
  const std::vector<NodeId> observed{0, 1, 2, 3};
  KhopOptions opts;
  opts.k = 2;
  opts.cap = std::nullopt;
  for (auto _ : state) {
    auto p = khop_neighbors(graph, observed, opts, rng);
    benchmark::DoNotOptimize(p.neighbors.data());
  }
}
BENCHMARK(BM_KhopNeighbors)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_EncoderForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  ParameterStore store;
  SageEncoder enc(store, "enc", SageConfig{32, 64, 2, true, false}, rng);
  const auto graph = testing::random_graph(n, 6.0 / static_cast<double>(n), rng);
  std::vector<NodeId> nodes(n);
  for (std::size_t i = 0; i < n; ++i) nodes[i] = static_cast<NodeId>(i);
  const auto local = make_local_graph(nodes, graph.edges());
  ad::Matrix x(n, 32);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : x.data()) v = normal(rng);
  const auto input = ad::Tensor::constant(x);
  for (auto _ : state) {
    auto loss = ad::mean(enc.forward(input, local, {}));
    ad::backward(loss);
    for (auto& t : store.tensors()) t.zero_grad();
  }
}
BENCHMARK(BM_EncoderForwardBackward)->Arg(16)->Arg(128)->Arg(1024);

void BM_TrainingBatch(benchmark::State& state) {
  auto cfg = run_config_from([] {
    KeyValueConfig c;
    c.set("variant", "khop+ps-infograph");
    return c;
  }());
  const auto bundle = load_run_dataset(cfg);
  PsiModel model(resolve_model(cfg, bundle), bundle.graph, bundle.features, 3);
  Rng rng(4);
  std::vector<const SubgraphRecord*> records;
  std::vector<PartialSubgraph> partials;
  for (std::size_t i = 0; i < 16; ++i) {
    records.push_back(&bundle.records[i]);
    partials.push_back(induced_partial_subgraph(
        bundle.records[i], sample_observed(bundle.records[i], cfg.protocol, Stage::kTrain, i, rng), i));
  }
  for (auto _ : state) {
    auto out = model.batch_step(records, partials, rng, StepMode::kTraining);
    ad::backward(out.loss);
    adam_step(model.parameters(), cfg.adam);
  }
}
BENCHMARK(BM_TrainingBatch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
