#include "psi/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "psi/graph_io.hpp"

namespace psi {

std::vector<std::size_t> DatasetBundle::indices(Stage stage) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == stage) out.push_back(i);
  }
  return out;
}

void DatasetBundle::validate() const {
  if (num_classes == 0 && !records.empty()) throw std::invalid_argument("bundle has records but no classes");
  if (splits.size() != records.size()) {
    throw std::invalid_argument("split count " + std::to_string(splits.size()) + " != record count " +
                                std::to_string(records.size()));
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    try {
      validate_record(graph, r);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("record " + std::to_string(i) + ": " + e.what());
    }
    if (r.label < 0 || static_cast<std::size_t>(r.label) >= num_classes) {
      throw std::invalid_argument("record " + std::to_string(i) + " has label " + std::to_string(r.label) +
                                  " outside 0.." + std::to_string(num_classes - 1));
    }
    if (ordered && !r.observation_order) {
      throw std::invalid_argument("ordered bundle, record " + std::to_string(i) + " has no order");
    }
  }
  if (features && features->rows() != graph.num_nodes()) {
    throw std::invalid_argument("feature rows " + std::to_string(features->rows()) + " != global nodes " +
                                std::to_string(graph.num_nodes()));
  }
}

DatasetStats compute_statistics(const DatasetBundle& bundle) {
  DatasetStats s;
  s.subgraphs = bundle.records.size();
  s.classes = bundle.num_classes;
  s.global_nodes = bundle.graph.num_nodes();
  s.global_edges = bundle.graph.num_edges();
  if (bundle.records.empty()) return s;
  double sn = 0, se = 0, qn = 0, qe = 0;
  for (const auto& r : bundle.records) {
    const auto n = static_cast<double>(r.node_ids.size()), e = static_cast<double>(r.edge_pairs.size());
    sn += n;
    se += e;
  }
  const auto m = static_cast<double>(bundle.records.size());
  s.mean_nodes = sn / m;
  s.mean_edges = se / m;
  for (const auto& r : bundle.records) {
    qn += std::pow(static_cast<double>(r.node_ids.size()) - s.mean_nodes, 2);
    qe += std::pow(static_cast<double>(r.edge_pairs.size()) - s.mean_edges, 2);
  }
  if (bundle.records.size() > 1) {
    s.std_nodes = std::sqrt(qn / (m - 1));
    s.std_edges = std::sqrt(qe / (m - 1));
  }
  return s;
}

const std::vector<ExpectedStats>& known_dataset_stats() {
  static const std::vector<ExpectedStats> stats = {
      {"HPO-Metab", 2397, 6, 14587, 14.4},
      {"EM-User", 319, 2, 57333, 155.4},
      {"FNTN", 1107, 4, 362232, 408.6},
  };
  return stats;
}

const ExpectedStats* find_known_stats(const std::string& name) {
  for (const auto& s : known_dataset_stats()) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::vector<std::string> compare_statistics(const DatasetStats& got, const ExpectedStats& want) {
  std::vector<std::string> out;
  auto check = [&](const char* what, std::size_t g, std::size_t w) {
    if (g != w) out.push_back(std::string(what) + ": got " + std::to_string(g) + ", expected " + std::to_string(w));
  };
  check("subgraphs", got.subgraphs, want.subgraphs);
  check("classes", got.classes, want.classes);
  check("global nodes", got.global_nodes, want.global_nodes);
  if (std::abs(got.mean_nodes - want.mean_nodes) > 0.05) {
    out.push_back("mean nodes per subgraph: got " + std::to_string(got.mean_nodes) + ", expected " +
                  std::to_string(want.mean_nodes));
  }
  return out;
}

ad::Matrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<double> values;
  std::size_t rows = 0, cols = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::size_t count = 0;
    double v = 0;
    while (fields >> v) {
      values.push_back(v);
      ++count;
    }
    if (!fields.eof()) throw ParseError(path.string(), line_no, "non-numeric embedding value");
    if (count == 0) continue;
    if (cols == 0) cols = count;
    if (count != cols) {
      throw ParseError(path.string(), line_no,
                       "expected " + std::to_string(cols) + " values, found " + std::to_string(count));
    }
    ++rows;
  }
  return ad::Matrix(rows, cols, std::move(values));
}

void write_embeddings(const std::filesystem::path& path, const ad::Matrix& values) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  for (std::size_t r = 0; r < values.rows(); ++r) {
    for (std::size_t c = 0; c < values.cols(); ++c) out << (c ? " " : "") << values(r, c);
    out << '\n';
  }
}

DatasetBundle load_dataset(const LoadOptions& options) {
  auto edges = read_edge_list(options.edge_file);
  auto raw = read_subgraphs(options.subgraph_file);
  if (raw.empty()) spdlog::warn("{}: subgraph file {} has no records", options.name, options.subgraph_file.string());

  std::optional<ad::Matrix> features;
  if (options.embedding_file) features = read_embeddings(*options.embedding_file);

  std::size_t n = 0;
  for (const auto& e : edges) n = std::max<std::size_t>(n, std::max(e.src, e.dst) + std::size_t{1});
  for (const auto& r : raw) {
    for (auto v : r.ids) n = std::max<std::size_t>(n, v + std::size_t{1});
  }
  if (features) n = std::max(n, features->rows());
  if (options.num_nodes) {
    if (*options.num_nodes < n) {
      throw std::invalid_argument("declared node count " + std::to_string(*options.num_nodes) +
                                  " is smaller than the ids in the files (" + std::to_string(n) + ")");
    }
    n = *options.num_nodes;
  }

  DatasetBundle bundle;
  bundle.name = options.name;
  bundle.ordered = options.ordered;
  bundle.graph = GlobalGraph(n, std::move(edges), options.symmetrize);
  if (features && features->rows() != n) {
    throw std::invalid_argument("embedding rows " + std::to_string(features->rows()) + " != node count " +
                                std::to_string(n));
  }
  bundle.features = std::move(features);

  std::set<std::string> labels;
  for (const auto& r : raw) labels.insert(r.label);
  bundle.class_names.assign(labels.begin(), labels.end());
  bundle.num_classes = bundle.class_names.size();
  std::map<std::string, int> label_index;
  for (std::size_t i = 0; i < bundle.class_names.size(); ++i) label_index[bundle.class_names[i]] = static_cast<int>(i);

  std::vector<std::optional<Stage>> tagged;
  std::size_t dropped = 0;
  for (const auto& r : raw) {
    std::set<NodeId> distinct(r.ids.begin(), r.ids.end());
    if (distinct.size() < 2) {
      ++dropped;
      continue;
    }
    bundle.records.push_back(make_record(bundle.graph, r.ids, label_index.at(r.label), options.ordered));
    tagged.push_back(r.split ? std::optional<Stage>(parse_stage(*r.split)) : std::nullopt);
  }
  if (dropped) spdlog::info("{}: excluded {} single-node subgraphs", options.name, dropped);

  if (options.split_file) {
    bundle.splits = read_splits(*options.split_file, bundle.records.size());
  } else if (!tagged.empty() && std::all_of(tagged.begin(), tagged.end(), [](auto& t) { return t.has_value(); })) {
    for (const auto& t : tagged) bundle.splits.push_back(*t);
  } else {
    bundle.splits = make_splits(bundle.records.size(), options.ratios, options.split_seed);
  }
  bundle.validate();
  return bundle;
}

void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "edge_list.txt");
    if (!out) throw std::runtime_error("cannot write " + (dir / "edge_list.txt").string());
    write_edge_list(out, bundle.graph.edges());
  }
  {
    // Labels are written as class indices so a reload maps them identically.
    std::ofstream out(dir / "subgraphs.txt");
    if (!out) throw std::runtime_error("cannot write " + (dir / "subgraphs.txt").string());
    write_subgraphs(out, bundle.records);
  }
  {
    std::ofstream out(dir / "splits.txt");
    write_splits(out, bundle.splits);
  }
  if (bundle.features) write_embeddings(dir / "embeddings.txt", *bundle.features);
  std::ofstream meta(dir / "dataset.txt");
  meta << "name=" << bundle.name << "\nnum_nodes=" << bundle.graph.num_nodes() << "\nnum_classes=" << bundle.num_classes
       << "\nordered=" << (bundle.ordered ? 1 : 0) << '\n';
}

DatasetBundle load_bundle(const std::filesystem::path& dir, const std::string& name) {
  LoadOptions opts;
  opts.name = name;
  opts.edge_file = dir / "edge_list.txt";
  opts.subgraph_file = dir / "subgraphs.txt";
  opts.symmetrize = false;
  if (std::filesystem::exists(dir / "embeddings.txt")) opts.embedding_file = dir / "embeddings.txt";
  if (std::filesystem::exists(dir / "splits.txt")) opts.split_file = dir / "splits.txt";
  std::size_t num_classes = 0;
  if (std::ifstream meta(dir / "dataset.txt"); meta) {
    std::string line;
    while (std::getline(meta, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const auto key = line.substr(0, eq), value = line.substr(eq + 1);
      if (key == "num_nodes") opts.num_nodes = std::stoull(value);
      if (key == "ordered") opts.ordered = value == "1";
      if (key == "num_classes") num_classes = std::stoull(value);
      if (key == "name" && name == "dataset") opts.name = value;
    }
  }
  auto bundle = load_dataset(opts);
  // Written labels are indices; restore the full class range even when a
  // class has no records, and keep numeric order.
  if (num_classes >= bundle.num_classes) {
    std::vector<int> remap(bundle.class_names.size());
    for (std::size_t i = 0; i < remap.size(); ++i) remap[i] = std::stoi(bundle.class_names[i]);
    for (auto& r : bundle.records) r.label = remap[static_cast<std::size_t>(r.label)];
    bundle.num_classes = num_classes;
    bundle.class_names.clear();
    for (std::size_t i = 0; i < num_classes; ++i) bundle.class_names.push_back(std::to_string(i));
  }
  bundle.validate();
  return bundle;
}

}  // namespace psi
