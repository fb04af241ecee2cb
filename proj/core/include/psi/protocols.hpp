#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "psi/graph.hpp"
#include "psi/random.hpp"

namespace psi {

enum class Stage { kTrain, kVal, kTest };

std::string_view stage_name(Stage s);
/// "train", "val" (or "valid"), "test".
Stage parse_stage(std::string_view name);

struct ObservationProtocol {
  std::size_t n_obs = 4;
  bool ordered = false;
  bool train_jitter = true;       // train sizes drawn from {n_obs-2, ..., n_obs+2}
  std::uint64_t eval_seed = 0;    // freezes val/test observations

  void validate() const;
};

/// `requested` clamped to [1, available].
std::size_t clamp_observed_size(std::ptrdiff_t requested, std::size_t available);

/// Observed node ids of `record`, in observation order.
///   val/test: n_obs nodes drawn from a stream seeded by
///             (eval_seed, record_index, stage, n_obs), so repeated calls,
///             epochs and processes agree;
///   train:    a fresh draw from `rng` on every call, with size jitter.
/// Ordered protocols take the prefix of observation_order; unordered ones
/// draw uniformly without replacement. Throws std::invalid_argument for an
/// ordered protocol on a record without an observation order.
std::vector<NodeId> sample_observed(const SubgraphRecord& record, const ObservationProtocol& protocol,
                                    Stage stage, std::size_t record_index, Rng& rng);

struct SplitRatios {
  double train = 0.7;
  double val = 0.15;
  double test = 0.15;
};

/// Seeded shuffle then contiguous cut: floor(train * n) train records,
/// floor(val * n) val records, the rest test. Throws for negative ratios or
/// ratios not summing to 1 within 1e-9.
std::vector<Stage> make_splits(std::size_t num_records, const SplitRatios& ratios, std::uint64_t seed);

/// "record_index<TAB>train|val|test" per line.
void write_splits(std::ostream& out, std::span<const Stage> splits);
std::vector<Stage> read_splits(std::istream& in, std::size_t num_records, const std::string& source = "<splits>");
std::vector<Stage> read_splits(const std::filesystem::path& path, std::size_t num_records);

}  // namespace psi
