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

// Monte Carlo size and power experiments for the break tests over a grid of
// (n, c, gamma_x, tau, test) cells, with reproducible per-cell seeding.
#ifndef QBREAK_MCHARNESS_HPP_
#define QBREAK_MCHARNESS_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qbreak/breaktests.hpp"
#include "qbreak/ivx.hpp"
#include "qbreak/limitsim.hpp"
#include "qbreak/tsgen.hpp"

namespace qbreak {

struct ExperimentConfig {
  std::vector<std::size_t> n_list{250, 500, 750, 1000};
  std::vector<double> c_list{-1.0, -2.0, -5.0};  // c applied to every regressor
  std::vector<double> gamma_x_list{0.75, 1.0};
  std::vector<double> tau_list{0.25, 0.5, 0.75};
  std::vector<TestKind> tests{{StatisticType::kSW, Estimator::kIVZ},
                              {StatisticType::kSQ, Estimator::kIVZ}};
  std::size_t reps = 1000;
  double alpha_level = 0.05;
  double eta = 0.15;
  IvxConfig ivx = IvxConfig::defaults(3);
  BreakScenario scenario = BreakScenario::null(default_theta());
  double rho_uv = 0.0;  // correlation between u_t and each v_t entry
  // Declared persistence; unset means the true class of each cell.
  std::optional<PersistenceDeclaration> declared;
  std::size_t bootstrap_draws = 199;
  SimulationSettings limit_settings;
  std::uint64_t master_seed = 20240601;
  unsigned threads = 0;

  // (alpha, beta')' = (1, 0.25, 0.75, -0.5).
  static Vector default_theta();
  std::size_t p() const { return scenario.p(); }
  void validate() const;
};

struct CellKey {
  std::size_t n = 0;
  double c = 0.0;
  double gamma_x = 0.0;
  double tau = 0.5;
  TestKind test;
  auto operator<=>(const CellKey&) const = default;
};

struct CellResult {
  double rejection_rate = 0.0;
  std::size_t rep_count = 0;
  double mean_lambda_hat = 0.0;
  std::size_t failures = 0;
  std::vector<std::string> failure_reasons;  // "rep <i>: <reason>"
};

struct McReport {
  std::string experiment;  // "size" or "power"
  ExperimentConfig config;
  std::map<CellKey, CellResult> cells;
  double wall_time = 0.0;  // seconds
  std::map<std::string, std::string> versions;
};

// Null scenario required.
McReport run_size(const ExperimentConfig& config);
// Break scenario required (a zero-magnitude break is accepted).
McReport run_power(const ExperimentConfig& config);

// Seed of replication rep in the data cell (n, c, gamma_x). Independent of
// every other cell and of the test and quantile lists.
std::uint64_t replication_seed(std::uint64_t master_seed, std::size_t n, double c,
                               double gamma_x, std::size_t rep);

enum class TableFormat { kCsv, kJson };

// One row per cell in key order. wall_time is left out unless requested so
// that fixed-seed reports are byte-identical.
std::string emit_tables(const McReport& report, TableFormat format,
                        bool include_wall_time = false);
McReport report_from_json(const std::string& text);

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

}  // namespace qbreak

#endif  // QBREAK_MCHARNESS_HPP_
