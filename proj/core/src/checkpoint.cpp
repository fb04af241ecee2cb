#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "psi/optim.hpp"

namespace psi {

namespace {
constexpr const char* kFormat = "psi-parameters";
constexpr int kVersion = 1;
}  // namespace

std::string parameters_to_json(const ParameterStore& store) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& e : store.entries()) {
    const auto& v = e.tensor.value();
    for (double x : v.data()) {
      if (!std::isfinite(x)) throw std::runtime_error("parameter '" + e.name + "' is not finite");
    }
    params.push_back({{"name", e.name},
                      {"rows", v.rows()},
                      {"cols", v.cols()},
                      {"values", std::vector<double>(v.data().begin(), v.data().end())}});
  }
  nlohmann::json doc = {{"format", kFormat}, {"version", kVersion}, {"parameters", params}};
  return doc.dump();
}

void parameters_from_json(ParameterStore& store, const std::string& json) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint parse error: ") + e.what());
  }
  if (doc.value("format", "") != kFormat || doc.value("version", 0) != kVersion) {
    throw std::runtime_error("not a psi parameter checkpoint (format/version mismatch)");
  }
  std::unordered_set<std::string> seen;
  for (const auto& p : doc.at("parameters")) {
    const auto name = p.at("name").get<std::string>();
    if (!store.contains(name)) throw std::runtime_error("checkpoint has unknown parameter '" + name + "'");
    auto tensor = store.get(name);
    const auto rows = p.at("rows").get<std::size_t>();
    const auto cols = p.at("cols").get<std::size_t>();
    auto values = p.at("values").get<std::vector<double>>();
    if (rows != tensor.rows() || cols != tensor.cols() || values.size() != rows * cols) {
      throw std::runtime_error("checkpoint shape mismatch for '" + name + "': file " +
                               ad::shape_string(rows, cols) + ", model " +
                               ad::shape_string(tensor.rows(), tensor.cols()));
    }
    tensor.mutable_value() = ad::Matrix(rows, cols, std::move(values));
    seen.insert(name);
  }
  for (const auto& e : store.entries()) {
    if (!seen.contains(e.name)) throw std::runtime_error("checkpoint is missing parameter '" + e.name + "'");
  }
}

void save_parameters(const ParameterStore& store, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << parameters_to_json(store) << '\n';
}

void load_parameters(ParameterStore& store, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  parameters_from_json(store, ss.str());
}

}  // namespace psi
