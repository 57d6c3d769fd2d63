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

// Monte Carlo tabulation of the limit laws used for break-test critical
// values: sup norms of Brownian bridges, the Andrews-type normalized
// sup-Wald functional, an Ornstein-Uhlenbeck based sup-Wald functional for
// local-to-unity regressors, and chi-square references.
#ifndef QBREAK_LIMITSIM_HPP_
#define QBREAK_LIMITSIM_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qbreak/linalg.hpp"

namespace qbreak {

enum class LimitFamily {
  kBbSupInfNorm,       // sup_l ||BB_p(l)||_inf
  kBbSupNormalizedSq,  // sup_l ||BB_p(l)||^2 / (l (1 - l))
  kOuWaldLur,          // sup_l D(l)' S(l)^{-1} D(l) with OU-driven Psi_c
  kChiSquare,
};

const char* to_string(LimitFamily family);
LimitFamily limit_family_from_string(const std::string& text);

struct LimitProcessId {
  LimitFamily family = LimitFamily::kBbSupInfNorm;
  std::size_t p = 1;
  double eta = 0.15;  // BB_SUP_INF_NORM also accepts 0 (untrimmed)
  Vector c;           // OU family only, one entry per dimension
  Matrix omega;       // OU family only; empty means identity

  void validate() const;
  // Canonical text form used for content hashing.
  std::string canonical() const;
};

// Default quantile levels of a table.
std::vector<double> default_quantile_levels();

struct CritTable {
  LimitProcessId id;
  std::size_t grid_steps = 0;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  std::map<double, double> quantiles;  // level -> value
  std::size_t discarded = 0;           // OU reps with singular matrices

  // Exact lookup; throws Error(kInvalidInput) for an untabulated level.
  double quantile(double level) const;
};

struct SimulationSettings {
  std::size_t grid_steps = 2000;
  std::size_t reps = 100000;
  std::uint64_t seed = 20240601;
  std::vector<double> levels = default_quantile_levels();
  unsigned threads = 1;
  // BB_SUP_INF_NORM only: also sample the exact extremes of the bridge
  // between grid nodes, so the table targets the continuous-time supremum
  // instead of its grid maximum (which is biased low by about 0.58/sqrt(m)).
  bool continuous_sup = true;
};

// Empirical quantile with linear interpolation between order statistics.
double empirical_quantile(std::vector<double> sorted_values, double level);

// Per rep: Brownian bridge per coordinate from scaled Gaussian increments,
// statistic = max over [eta, 1 - eta] of the max-abs coordinate, taken over
// grid nodes or, with continuous_sup, over the whole trimmed interval.
CritTable simulate_bb_sup(std::size_t p, double eta,
                          const SimulationSettings& settings);
// Per rep: max over nodes in [eta, 1 - eta] of ||BB_p(l)||^2 / (l (1 - l)).
CritTable simulate_andrews_sup(std::size_t p, double eta,
                               const SimulationSettings& settings);
// Euler discretization dJ = c J dl + dB, demeaned J, Ito sums for
// int J dJ', Psi_c(l) = (l Omega + int_0^l J dJ')(Omega + int_0^1 J dJ')^{-1},
// D(l) = W(l) - Psi_c(l) W(1) with W independent of B,
// S(l) = l (I - Psi)(I - Psi)' + (1 - l) Psi Psi'. Reps with a singular
// matrix anywhere on the trimmed grid are discarded and counted.
CritTable simulate_ou_wald_lur(std::size_t p, double eta, const Vector& c,
                               const SimulationSettings& settings,
                               const Matrix& omega = Matrix());
// Analytic chi-square table with p degrees of freedom.
CritTable chisq_table(std::size_t p,
                      const std::vector<double>& levels =
                          default_quantile_levels());

// Dispatches on id.family.
CritTable simulate_limit(const LimitProcessId& id,
                         const SimulationSettings& settings);

// The OU pieces, exposed for testing.
// S(l) for a given Psi.
Matrix ou_wald_covariance(double lambda, const Matrix& psi);
// Ito sum sum_k J_{k-1} (J_k - J_{k-1}) for a scalar path J_0..J_m.
double ito_integral(const std::vector<double>& path);

nlohmann::json to_json(const LimitProcessId& id);
LimitProcessId limit_id_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CritTable& table);
CritTable crit_table_from_json(const nlohmann::json& j);

// Disk cache of simulated tables. One JSON file per table, named by a
// content hash of (id, grid_steps, reps, seed, levels).
class CritCache {
 public:
  explicit CritCache(std::filesystem::path directory);
  // QBREAK_CACHE_DIR if set, otherwise ./.qbreak-cache.
  static CritCache from_environment();

  struct Lookup {
    CritTable table;
    bool hit = false;
    std::optional<std::string> warning;  // set when a bad file was replaced
    std::filesystem::path file;
  };

  std::filesystem::path file_for(const LimitProcessId& id,
                                 const SimulationSettings& settings) const;
  Lookup get_or_compute(const LimitProcessId& id,
                        const SimulationSettings& settings);
  const std::filesystem::path& directory() const { return directory_; }

 private:
  std::filesystem::path directory_;
  std::mutex write_mutex_;
};

}  // namespace qbreak

#endif  // QBREAK_LIMITSIM_HPP_
