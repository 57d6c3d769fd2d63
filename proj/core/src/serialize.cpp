// Copyright 2026 The qbreak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qbreak/serialize.hpp"

#include <string>
#include <vector>

#include "qbreak/error.hpp"

namespace qbreak {
namespace {

constexpr const char* kModule = "serialize";

nlohmann::json level_map(const std::map<double, double>& m) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [level, value] : m) out.push_back({{"level", level}, {"value", value}});
  return out;
}

}  // namespace

nlohmann::json vector_to_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector vector_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw_data(kModule, "expected a numeric array");
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_to_json(m.row(r).transpose()));
  return out;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw_data(kModule, "expected an array of rows");
  if (j.empty()) return Matrix();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j.front().size()));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vector row = vector_from_json(j[r]);
    if (row.size() != m.cols()) throw_data(kModule, "ragged matrix rows");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

nlohmann::json to_json(const PersistenceSpec& spec) {
  return {{"gamma_x", spec.gamma_x}, {"c", vector_to_json(spec.c)},
          {"class", to_string(spec.cls)}};
}

PersistenceSpec persistence_spec_from_json(const nlohmann::json& j) {
  PersistenceSpec spec;
  spec.gamma_x = j.at("gamma_x").get<double>();
  spec.c = vector_from_json(j.at("c"));
  spec.cls = j.contains("class")
                 ? persistence_class_from_string(j.at("class").get<std::string>())
                 : (spec.gamma_x < 1.0 ? PersistenceClass::kMI : PersistenceClass::kLUR);
  spec.validate();
  return spec;
}

nlohmann::json to_json(const InnovationSpec& spec) {
  nlohmann::json ma = nlohmann::json::array();
  for (const Matrix& w : spec.ma_weights) ma.push_back(matrix_to_json(w));
  return {{"sigma_uu", spec.sigma_uu}, {"rho", vector_to_json(spec.rho)},
          {"sigma_vv", matrix_to_json(spec.sigma_vv)}, {"ma_weights", ma}};
}

InnovationSpec innovation_spec_from_json(const nlohmann::json& j) {
  InnovationSpec spec;
  spec.sigma_uu = j.at("sigma_uu").get<double>();
  spec.rho = vector_from_json(j.at("rho"));
  spec.sigma_vv = matrix_from_json(j.at("sigma_vv"));
  if (j.contains("ma_weights")) {
    for (const auto& w : j.at("ma_weights")) spec.ma_weights.push_back(matrix_from_json(w));
  }
  spec.validate();
  return spec;
}

nlohmann::json to_json(const BreakScenario& scenario) {
  nlohmann::json j{{"theta1", vector_to_json(scenario.theta1)},
                   {"theta2", vector_to_json(scenario.theta2)}};
  j["lambda0"] = scenario.lambda0 ? nlohmann::json(*scenario.lambda0) : nlohmann::json();
  return j;
}

BreakScenario break_scenario_from_json(const nlohmann::json& j) {
  BreakScenario s;
  s.theta1 = vector_from_json(j.at("theta1"));
  s.theta2 = j.contains("theta2") ? vector_from_json(j.at("theta2")) : s.theta1;
  if (j.contains("lambda0") && !j.at("lambda0").is_null()) s.lambda0 = j.at("lambda0").get<double>();
  s.validate();
  return s;
}

nlohmann::json to_json(const Sample& sample) {
  return {{"y", vector_to_json(sample.y)}, {"x_lagged", matrix_to_json(sample.x_lagged)},
          {"has_intercept", sample.has_intercept}};
}

Sample sample_from_json(const nlohmann::json& j) {
  Sample s;
  s.y = vector_from_json(j.at("y"));
  s.x_lagged = matrix_from_json(j.at("x_lagged"));
  s.has_intercept = j.value("has_intercept", true);
  s.validate();
  return s;
}

nlohmann::json to_json(const IvxConfig& config) {
  return {{"c_z", vector_to_json(config.c_z)}, {"gamma_z", config.gamma_z},
          {"allow_degenerate", config.allow_degenerate}};
}

IvxConfig ivx_config_from_json(const nlohmann::json& j) {
  IvxConfig c;
  c.c_z = vector_from_json(j.at("c_z"));
  c.gamma_z = j.value("gamma_z", 0.95);
  c.allow_degenerate = j.value("allow_degenerate", false);
  c.validate();
  return c;
}

nlohmann::json to_json(const QrFit& fit) {
  nlohmann::json j{{"tau", fit.tau.value()},
                   {"theta", vector_to_json(fit.theta)},
                   {"objective", fit.objective},
                   {"iterations", fit.iterations},
                   {"pivots", fit.pivots},
                   {"basis", fit.basis}};
  j["sparsity"] = fit.sparsity ? nlohmann::json(*fit.sparsity) : nlohmann::json();
  return j;
}

nlohmann::json to_json(const IvxFit& fit) {
  nlohmann::json j{{"tau", fit.tau.value()},
                   {"method", to_string(fit.method)},
                   {"beta", vector_to_json(fit.beta)},
                   {"alpha_hat", fit.alpha_hat},
                   {"foc_norm", fit.foc_norm},
                   {"foc_tolerance", fit.foc_tolerance},
                   {"converged", fit.converged},
                   {"diagnostic", fit.diagnostic}};
  j["sparsity"] = fit.sparsity ? nlohmann::json(*fit.sparsity) : nlohmann::json();
  return j;
}

nlohmann::json to_json(const WaldResult& wald) {
  return {{"statistic", wald.statistic}, {"df", wald.df}, {"p_value", wald.p_value}};
}

nlohmann::json to_json(const LambdaGrid& grid) {
  return {{"n", grid.n}, {"eta", grid.eta}, {"indices", grid.indices},
          {"fractions", grid.fractions}};
}

nlohmann::json to_json(const BreakTestResult& r) {
  nlohmann::json j;
  j["kind"] = to_string(r.kind);
  j["taus"] = r.taus;
  j["d_cols"] = r.d_cols;
  j["statistic"] = r.statistic;
  j["lambda_hat"] = r.lambda_hat;
  j["kappa_hat"] = r.kappa_hat;
  j["tau_hat"] = r.tau_hat;
  j["path"] = {{"lambda", r.path_lambdas}, {"value", r.path_values}};
  j["crit_method"] = to_string(r.crit_method);
  j["crit"] = level_map(r.crit);
  nlohmann::json dec = nlohmann::json::array();
  for (const auto& [level, rej] : r.reject) dec.push_back({{"level", level}, {"reject", rej}});
  j["decision"] = dec;
  nlohmann::json dropped = nlohmann::json::array();
  for (const DroppedLambda& d : r.dropped) {
    dropped.push_back({{"lambda", d.lambda}, {"kappa", d.kappa}, {"reason", d.reason}});
  }
  j["dropped"] = dropped;
  j["diagnostics"] = r.diagnostics;
  j["sparsity"] = r.sparsity ? nlohmann::json(*r.sparsity) : nlohmann::json();
  if (!r.per_tau.empty()) {
    nlohmann::json per = nlohmann::json::array();
    for (const BreakTestResult& p : r.per_tau) per.push_back(to_json(p));
    j["per_tau"] = per;
  }
  return j;
}

}  // namespace qbreak
