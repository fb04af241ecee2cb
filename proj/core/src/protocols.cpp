#include "psi/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "psi/graph_io.hpp"
#include "psi/infomax.hpp"

namespace psi {

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::kTrain: return "train";
    case Stage::kVal: return "val";
    case Stage::kTest: return "test";
  }
  return "unknown";
}

Stage parse_stage(std::string_view name) {
  if (name == "train") return Stage::kTrain;
  if (name == "val" || name == "valid" || name == "validation") return Stage::kVal;
  if (name == "test") return Stage::kTest;
  throw std::invalid_argument("unknown split '" + std::string(name) + "'");
}

void ObservationProtocol::validate() const {
  if (n_obs < 1) throw std::invalid_argument("n_obs must be >= 1");
}

std::size_t clamp_observed_size(std::ptrdiff_t requested, std::size_t available) {
  if (available == 0) return 0;
  if (requested < 1) return 1;
  return std::min(static_cast<std::size_t>(requested), available);
}

std::vector<NodeId> sample_observed(const SubgraphRecord& record, const ObservationProtocol& protocol,
                                    Stage stage, std::size_t record_index, Rng& rng) {
  if (record.node_ids.empty()) throw std::invalid_argument("cannot observe an empty subgraph");
  if (protocol.ordered && !record.observation_order) {
    throw std::invalid_argument("ordered protocol but record " + std::to_string(record_index) +
                                " has no observation order");
  }
  Rng eval_rng(derive_seed(protocol.eval_seed,
                           {record_index, static_cast<std::uint64_t>(stage), protocol.n_obs}));
  Rng& source = stage == Stage::kTrain ? rng : eval_rng;

  auto requested = static_cast<std::ptrdiff_t>(protocol.n_obs);
  if (stage == Stage::kTrain && protocol.train_jitter) {
    std::uniform_int_distribution<int> jitter(-2, 2);
    requested += jitter(source);
  }
  const auto size = clamp_observed_size(requested, record.node_ids.size());

  if (protocol.ordered) {
    const auto& order = *record.observation_order;
    return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(size)};
  }
  // Partial Fisher-Yates: a uniform draw without replacement in random order.
  std::vector<NodeId> pool = record.node_ids;
  for (std::size_t i = 0; i < size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(source)]);
  }
  pool.resize(size);
  return pool;
}

std::vector<Stage> make_splits(std::size_t num_records, const SplitRatios& ratios, std::uint64_t seed) {
  if (ratios.train < 0.0 || ratios.val < 0.0 || ratios.test < 0.0) {
    throw std::invalid_argument("split ratios must be >= 0");
  }
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }
  const auto n = static_cast<double>(num_records);
  const auto n_train = std::min(num_records, static_cast<std::size_t>(std::floor(ratios.train * n + 1e-9)));
  const auto n_val =
      std::min(num_records - n_train, static_cast<std::size_t>(std::floor(ratios.val * n + 1e-9)));
  Rng rng(seed);
  const auto perm = random_permutation(num_records, rng);
  std::vector<Stage> out(num_records, Stage::kTest);
  for (std::size_t i = 0; i < num_records; ++i) {
    if (i < n_train) {
      out[perm[i]] = Stage::kTrain;
    } else if (i < n_train + n_val) {
      out[perm[i]] = Stage::kVal;
    }
  }
  return out;
}

void write_splits(std::ostream& out, std::span<const Stage> splits) {
  for (std::size_t i = 0; i < splits.size(); ++i) out << i << '\t' << stage_name(splits[i]) << '\n';
}

std::vector<Stage> read_splits(std::istream& in, std::size_t num_records, const std::string& source) {
  std::vector<Stage> out(num_records, Stage::kTrain);
  std::vector<bool> seen(num_records, false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    std::size_t index = 0;
    std::string tag, extra;
    if (!(fields >> index >> tag) || (fields >> extra)) {
      throw ParseError(source, line_no, "expected 'record_index<TAB>train|val|test'");
    }
    if (index >= num_records) throw ParseError(source, line_no, "record index out of range");
    try {
      out[index] = parse_stage(tag);
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, line_no, e.what());
    }
    seen[index] = true;
  }
  for (std::size_t i = 0; i < num_records; ++i) {
    if (!seen[i]) throw ParseError(source, 0, "record " + std::to_string(i) + " has no split");
  }
  return out;
}

std::vector<Stage> read_splits(const std::filesystem::path& path, std::size_t num_records) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_splits(in, num_records, path.string());
}

}  // namespace psi
