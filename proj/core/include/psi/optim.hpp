#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "psi/autodiff.hpp"
#include "psi/random.hpp"

namespace psi {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // L2 term added to the gradient

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// Owns every named parameter tensor of a model together with its Adam
/// moments. Insertion order is preserved, so iteration is deterministic.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    ad::Tensor tensor;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t steps = 0;
  };

  /// Registers a trainable tensor. Throws on a duplicate name.
  ad::Tensor add(const std::string& name, ad::Matrix init);
  /// Registers a rows x cols tensor drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  ad::Tensor add_uniform(const std::string& name, std::size_t rows, std::size_t cols,
                         std::size_t fan_in, Rng& rng);

  bool contains(const std::string& name) const { return index_.contains(name); }
  ad::Tensor get(const std::string& name) const;
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t num_scalars() const;

  std::span<Entry> entries() noexcept { return entries_; }
  std::span<const Entry> entries() const noexcept { return entries_; }
  std::vector<ad::Tensor> tensors() const;

  void zero_grad();

  /// Copy of every parameter value, in entry order.
  std::vector<ad::Matrix> snapshot() const;
  void restore(std::span<const ad::Matrix> values);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// One bias-corrected Adam update over every parameter that has a gradient,
/// followed by clearing all gradients. Parameters without a gradient are
/// skipped (and logged at debug level).
void adam_step(ParameterStore& store, const AdamConfig& config);

/// Central-difference gradient check. Evaluates `scalar_fn` once to get
/// analytic gradients, then perturbs every coordinate of every tensor in
/// `params` by +/- epsilon. Returns the max over coordinates of
/// |analytic - numeric| / max(1e-6, |analytic| + |numeric|). The floor sits
/// above the ~1e-11 roundoff of a central difference at epsilon = 1e-5.
/// `scalar_fn` must be deterministic. Gradients of `params` are cleared on
/// return.
double finite_diff_check(const std::function<ad::Tensor()>& scalar_fn,
                         std::span<ad::Tensor> params, double epsilon = 1e-5);

// Checkpoints are JSON: {"format": "psi-parameters", "version": 1,
// "parameters": [{"name", "rows", "cols", "values"}...]}. Doubles are
// written in shortest round-trip form, so load(save(x)) == x bit-exactly.
std::string parameters_to_json(const ParameterStore& store);
/// Overwrites values of existing parameters. Throws std::runtime_error on a
/// missing name, an unknown name, or a shape mismatch.
void parameters_from_json(ParameterStore& store, const std::string& json);
void save_parameters(const ParameterStore& store, const std::filesystem::path& path);
void load_parameters(ParameterStore& store, const std::filesystem::path& path);

}  // namespace psi
