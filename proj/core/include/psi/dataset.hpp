#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "psi/autodiff.hpp"
#include "psi/graph.hpp"
#include "psi/protocols.hpp"

namespace psi {

struct DatasetBundle {
  std::string name;
  GlobalGraph graph;
  std::vector<SubgraphRecord> records;
  std::size_t num_classes = 0;
  std::vector<std::string> class_names;  // index = label
  std::vector<Stage> splits;             // one per record
  std::optional<ad::Matrix> features;    // frozen X^glob; absent = trainable table
  bool ordered = false;

  std::vector<std::size_t> indices(Stage stage) const;
  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const;
};

struct DatasetStats {
  std::size_t subgraphs = 0;
  std::size_t classes = 0;
  std::size_t global_nodes = 0;
  std::size_t global_edges = 0;
  double mean_nodes = 0.0;
  double std_nodes = 0.0;
  double mean_edges = 0.0;
  double std_edges = 0.0;
};

DatasetStats compute_statistics(const DatasetBundle& bundle);

struct ExpectedStats {
  std::string name;
  std::size_t subgraphs = 0;
  std::size_t classes = 0;
  std::size_t global_nodes = 0;
  double mean_nodes = 0.0;  // compared within 0.05
};

/// Published statistics of the real-world benchmarks.
const std::vector<ExpectedStats>& known_dataset_stats();
const ExpectedStats* find_known_stats(const std::string& name);

/// Human-readable mismatches; empty when everything agrees.
std::vector<std::string> compare_statistics(const DatasetStats& got, const ExpectedStats& want);

struct LoadOptions {
  std::string name = "dataset";
  std::filesystem::path edge_file;
  std::filesystem::path subgraph_file;
  std::optional<std::filesystem::path> embedding_file;
  std::optional<std::filesystem::path> split_file;
  SplitRatios ratios;  // used when neither the split file nor the subgraph file carries splits
  std::uint64_t split_seed = 0;
  bool symmetrize = true;
  bool ordered = false;
  std::optional<std::size_t> num_nodes;  // default: max id + 1 (or embedding rows)
};

/// Parses the files, drops single-node subgraphs, maps labels to 0..C-1 in
/// sorted label order, and assigns splits (split file, then per-line split
/// tags, then a seeded random split). Malformed lines throw ParseError.
DatasetBundle load_dataset(const LoadOptions& options);

/// One row per node, whitespace-separated reals.
ad::Matrix read_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path, const ad::Matrix& values);

/// Writes edge_list.txt, subgraphs.txt, splits.txt, and embeddings.txt
/// (when features exist) into `dir`; load_bundle reads them back.
void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);
DatasetBundle load_bundle(const std::filesystem::path& dir, const std::string& name = "dataset");

struct SyntheticSpec {
  std::size_t num_nodes = 300;
  std::size_t communities = 8;
  double p_in = 0.06;
  double p_out = 0.01;
  std::size_t num_subgraphs = 100;
  std::size_t min_size = 8;
  std::size_t max_size = 16;
  std::size_t num_classes = 2;
  double stay_prob = 0.9;       // walk step restricted to the home community
  double noise = 0.3;           // std of the Gaussian added to the one-hot features
  std::size_t noise_dims = 8;   // extra pure-noise feature columns
  std::size_t n_obs = 4;        // sizes are raised to at least n_obs + 2
  bool ordered = false;
  SplitRatios ratios;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Stochastic block graph, random-walk subgraphs anchored in one community,
/// label = (majority community of the walk) mod num_classes, features =
/// one-hot community + N(0, noise^2) as a frozen table.
DatasetBundle generate_synthetic(const SyntheticSpec& spec);

}  // namespace psi
