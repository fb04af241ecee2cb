#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "psi/dataset.hpp"
#include "psi/graph_io.hpp"

using namespace psi;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) : path_(fs::temp_directory_path() / ("psi_test_" + tag)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name) << text;
    return path_ / name;
  }

 private:
  fs::path path_;
};

std::vector<Edge> edges_of(const GlobalGraph& g) { return {g.edges().begin(), g.edges().end()}; }

}  // namespace

TEST(LoadDataset, DropsSingletonsAndMapsLabels) {
  TempDir dir("load");
  LoadOptions o;
  o.edge_file = dir.write("edges.txt", "0 1\n1 2\n2 3\n3 4\n4 5\n");
  o.subgraph_file = dir.write("subs.txt", "b\t0,1,2\na\t3\nb\t4,5\na\t2,3\n");
  o.ratios = {1.0, 0.0, 0.0};
  const auto b = load_dataset(o);
  ASSERT_EQ(b.records.size(), 3u);
  EXPECT_EQ(b.class_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(b.records[0].label, 1);
  EXPECT_EQ(b.records[2].label, 0);
  EXPECT_EQ(b.graph.num_nodes(), 6u);
  EXPECT_TRUE(b.graph.has_edge(1, 0));  // symmetrized
  EXPECT_EQ(b.records[0].edge_pairs.size(), 4u);
  EXPECT_EQ(b.indices(Stage::kTrain).size(), 3u);
}

TEST(LoadDataset, SplitTagsAndSplitFile) {
  TempDir dir("splits");
  LoadOptions o;
  o.edge_file = dir.write("edges.txt", "0 1\n1 2\n");
  o.subgraph_file = dir.write("subs.pth", "0-1\tx\ttrain\n1-2\ty\tval\n0-2\tx\ttest\n");
  auto b = load_dataset(o);
  EXPECT_EQ(b.splits, (std::vector<Stage>{Stage::kTrain, Stage::kVal, Stage::kTest}));
  o.split_file = dir.write("split.txt", "0\ttest\n1\ttest\n2\ttrain\n");
  b = load_dataset(o);
  EXPECT_EQ(b.splits, (std::vector<Stage>{Stage::kTest, Stage::kTest, Stage::kTrain}));
}

TEST(LoadDataset, Errors) {
  TempDir dir("errors");
  LoadOptions o;
  o.edge_file = dir.write("edges.txt", "0 1\n1 x\n");
  o.subgraph_file = dir.write("subs.txt", "a\t0,1\n");
  EXPECT_THROW(load_dataset(o), ParseError);
  o.edge_file = dir.write("edges.txt", "0 1\n");
  o.num_nodes = 1;
  EXPECT_THROW(load_dataset(o), std::invalid_argument);
  o.num_nodes.reset();
  o.embedding_file = dir.write("emb.txt", "1 2\n");
  EXPECT_THROW(load_dataset(o), std::invalid_argument);  // fewer rows than node ids
  o.embedding_file = dir.write("emb.txt", "1 2\n3 4\n5 6\n");
  EXPECT_EQ(load_dataset(o).graph.num_nodes(), 3u);  // extra rows add isolated nodes
  o.embedding_file = dir.path() / "missing.txt";
  EXPECT_THROW(load_dataset(o), std::runtime_error);
}

TEST(LoadDataset, EmptySubgraphFile) {
  TempDir dir("empty");
  LoadOptions o;
  o.edge_file = dir.write("edges.txt", "0 1\n");
  o.subgraph_file = dir.write("subs.txt", "");
  const auto b = load_dataset(o);
  EXPECT_TRUE(b.records.empty());
  EXPECT_EQ(compute_statistics(b).subgraphs, 0u);
}

TEST(Statistics, MeansAndSampleStd) {
  TempDir dir("stats");
  LoadOptions o;
  o.edge_file = dir.write("edges.txt", "0 1\n1 2\n2 3\n");
  o.subgraph_file = dir.write("subs.txt", "a\t0,1\na\t0,1,2,3\n");
  const auto s = compute_statistics(load_dataset(o));
  EXPECT_EQ(s.subgraphs, 2u);
  EXPECT_EQ(s.global_edges, 6u);
  EXPECT_DOUBLE_EQ(s.mean_nodes, 3.0);
  EXPECT_DOUBLE_EQ(s.std_nodes, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(s.mean_edges, 4.0);
}

TEST(Statistics, KnownBenchmarks) {
  ASSERT_EQ(known_dataset_stats().size(), 3u);
  const auto* hpo = find_known_stats("HPO-Metab");
  ASSERT_NE(hpo, nullptr);
  EXPECT_EQ(hpo->subgraphs, 2397u);
  EXPECT_EQ(hpo->classes, 6u);
  EXPECT_EQ(hpo->global_nodes, 14587u);
  EXPECT_EQ(find_known_stats("EM-User")->global_nodes, 57333u);
  EXPECT_EQ(find_known_stats("FNTN")->subgraphs, 1107u);
  EXPECT_EQ(find_known_stats("Cora"), nullptr);

  DatasetStats got;
  got.subgraphs = 2397;
  got.classes = 6;
  got.global_nodes = 14587;
  got.mean_nodes = 14.42;
  EXPECT_TRUE(compare_statistics(got, *hpo).empty());
  got.classes = 5;
  got.mean_nodes = 15.0;
  EXPECT_EQ(compare_statistics(got, *hpo).size(), 2u);
}

TEST(Bundle, SaveLoadRoundTrip) {
  SyntheticSpec spec;
  spec.num_nodes = 80;
  spec.num_subgraphs = 30;
  spec.communities = 4;
  spec.num_classes = 3;
  spec.ordered = true;
  const auto a = generate_synthetic(spec);
  TempDir dir("bundle");
  save_bundle(a, dir.path());
  const auto b = load_bundle(dir.path());
  EXPECT_EQ(b.name, a.name);
  EXPECT_EQ(edges_of(b.graph), edges_of(a.graph));
  EXPECT_EQ(b.num_classes, a.num_classes);
  EXPECT_EQ(b.splits, a.splits);
  EXPECT_TRUE(b.ordered);
  ASSERT_EQ(b.records.size(), a.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(b.records[i].node_ids, a.records[i].node_ids);
    EXPECT_EQ(b.records[i].label, a.records[i].label);
    EXPECT_EQ(b.records[i].observation_order, a.records[i].observation_order);
  }
  ASSERT_TRUE(b.features);
  EXPECT_EQ(*b.features, *a.features);
}

TEST(Embeddings, ReadWriteExact) {
  TempDir dir("emb");
  const ad::Matrix m{{0.1, -1.0 / 3.0}, {1e-300, 12345.678}};
  write_embeddings(dir.path() / "e.txt", m);
  EXPECT_EQ(read_embeddings(dir.path() / "e.txt"), m);
  dir.write("bad.txt", "1 2\n3\n");
  EXPECT_THROW(read_embeddings(dir.path() / "bad.txt"), ParseError);
}

TEST(Synthetic, DeterministicAndValid) {
  SyntheticSpec spec;
  spec.num_subgraphs = 100;
  spec.communities = 2;
  const auto a = generate_synthetic(spec), b = generate_synthetic(spec);
  EXPECT_NO_THROW(a.validate());
  EXPECT_EQ(edges_of(a.graph), edges_of(b.graph));
  EXPECT_EQ(*a.features, *b.features);
  ASSERT_EQ(a.records.size(), 100u);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].node_ids, b.records[i].node_ids);
    EXPECT_GE(a.records[i].node_ids.size(), spec.n_obs + 2);
  }
  spec.seed = 8;
  EXPECT_NE(edges_of(generate_synthetic(spec).graph), edges_of(a.graph));
}

TEST(Synthetic, NoiselessFeaturesRevealTheLabel) {
  SyntheticSpec spec;
  spec.communities = 2;
  spec.noise = 0.0;
  spec.stay_prob = 1.0;
  const auto b = generate_synthetic(spec);
  const auto& x = *b.features;
  ASSERT_EQ(x.cols(), spec.communities + spec.noise_dims);
  for (const auto& r : b.records) {
    std::map<std::size_t, int> votes;
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t c = 0; c < spec.communities; ++c) {
        if (x(r.node_ids[i], c) == 1.0) ++votes[c % spec.num_classes];
      }
    }
    const auto best = std::max_element(votes.begin(), votes.end(),
                                       [](auto& a, auto& b) { return a.second < b.second; });
    EXPECT_EQ(static_cast<int>(best->first), r.label);
  }
}

TEST(Synthetic, InfeasibleSpec) {
  SyntheticSpec spec;
  spec.num_nodes = 10;
  spec.max_size = 20;
  EXPECT_THROW(generate_synthetic(spec), std::invalid_argument);
  spec = {};
  spec.communities = 1;
  EXPECT_THROW(generate_synthetic(spec), std::invalid_argument);
}
