#include "psi/optim.hpp"

#include <cmath>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace psi {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("beta2 must be in [0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
}

ad::Tensor ParameterStore::add(const std::string& name, ad::Matrix init) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  const auto n = init.size();
  entries_.push_back({name, ad::Tensor::parameter(std::move(init)), std::vector<double>(n, 0.0),
                      std::vector<double>(n, 0.0), 0});
  return entries_.back().tensor;
}

ad::Tensor ParameterStore::add_uniform(const std::string& name, std::size_t rows, std::size_t cols,
                                       std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  ad::Matrix m(rows, cols);
  for (auto& x : m.data()) x = dist(rng);
  return add(name, std::move(m));
}

ad::Tensor ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return entries_[it->second].tensor;
}

std::size_t ParameterStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.value().size();
  return n;
}

std::vector<ad::Tensor> ParameterStore::tensors() const {
  std::vector<ad::Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.tensor);
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

std::vector<ad::Matrix> ParameterStore::snapshot() const {
  std::vector<ad::Matrix> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.tensor.value());
  return out;
}

void ParameterStore::restore(std::span<const ad::Matrix> values) {
  if (values.size() != entries_.size()) throw std::invalid_argument("snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& dst = entries_[i].tensor.mutable_value();
    if (dst.rows() != values[i].rows() || dst.cols() != values[i].cols()) {
      throw std::invalid_argument("snapshot shape mismatch for '" + entries_[i].name + "'");
    }
    dst = values[i];
  }
}

void adam_step(ParameterStore& store, const AdamConfig& config) {
  for (auto& e : store.entries()) {
    if (!e.tensor.has_grad()) {
      spdlog::debug("adam_step: '{}' has no gradient, skipped", e.name);
      continue;
    }
    ++e.steps;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(e.steps));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(e.steps));
    auto& value = e.tensor.mutable_value();
    auto grad = e.tensor.grad();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i] + config.weight_decay * value[i];
      e.first_moment[i] = config.beta1 * e.first_moment[i] + (1.0 - config.beta1) * g;
      e.second_moment[i] = config.beta2 * e.second_moment[i] + (1.0 - config.beta2) * g * g;
      const double m_hat = e.first_moment[i] / bc1;
      const double v_hat = e.second_moment[i] / bc2;
      value[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
  store.zero_grad();
}

constexpr double kFiniteDiffFloor = 1e-6;

double finite_diff_check(const std::function<ad::Tensor()>& scalar_fn, std::span<ad::Tensor> params,
                         double epsilon) {
  for (auto& p : params) p.zero_grad();
  ad::backward(scalar_fn());
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    if (p.has_grad()) {
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      analytic.emplace_back(p.value().size(), 0.0);
    }
    p.zero_grad();
  }

  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& value = params[t].mutable_value();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + epsilon;
      const double plus = scalar_fn().item();
      value[i] = saved - epsilon;
      const double minus = scalar_fn().item();
      value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = analytic[t][i];
      const double err = std::abs(a - numeric) / std::max(kFiniteDiffFloor, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, err);
    }
    params[t].zero_grad();
  }
  return worst;
}

}  // namespace psi
