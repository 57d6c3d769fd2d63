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

// Structural break tests for quantile predictive regressions: the
// fluctuation (sup-Q) statistic built from recentered subgradient partial
// sums and the split-sample sup-Wald statistic, each in OLS, IVX and IVZ
// flavours, for one quantile or the maximum over a set of quantiles, plus a
// Wald test at a known break date.
#ifndef QBREAK_BREAKTESTS_HPP_
#define QBREAK_BREAKTESTS_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qbreak/ivx.hpp"
#include "qbreak/limitsim.hpp"
#include "qbreak/linalg.hpp"
#include "qbreak/qrsolve.hpp"
#include "qbreak/tsgen.hpp"

namespace qbreak {

enum class Estimator { kOLS, kIVX, kIVZ };
enum class StatisticType { kSQ, kSW };

struct TestKind {
  StatisticType statistic = StatisticType::kSW;
  Estimator estimator = Estimator::kIVZ;
  auto operator<=>(const TestKind&) const = default;
};

const char* to_string(Estimator estimator);
Estimator estimator_from_string(const std::string& text);
// "SQ-OLS", "SW-IVZ", ...
std::string to_string(TestKind kind);
// Accepts "SW-IVZ", "sw_ivz", "sw-ivz".
TestKind test_kind_from_string(const std::string& text);

enum class CritMethod { kSimulatedLimit, kWildBootstrap, kChiSquare, kNone };
const char* to_string(CritMethod method);
CritMethod crit_method_from_string(const std::string& text);

// User declaration of regressor persistence; auto routes to the bootstrap.
enum class PersistenceDeclaration { kLUR, kMI, kAuto };
const char* to_string(PersistenceDeclaration declaration);
PersistenceDeclaration persistence_declaration_from_string(const std::string& text);

// Columns of the weights entering a statistic: p + 1 for OLS (intercept
// included), p for IVX and IVZ.
std::size_t design_columns(Estimator estimator, std::size_t p);

struct LambdaGrid {
  std::size_t n = 0;
  double eta = 0.15;
  std::vector<double> fractions;     // kappa / n
  std::vector<std::size_t> indices;  // kappa: regime 1 is t = 1..kappa
  std::size_t size() const { return indices.size(); }
};

// Every kappa in [ceil(eta n), floor((1 - eta) n)]. Throws
// Error(kInvalidInput) when the range is empty or when either regime at an
// endpoint has fewer than d_cols + 1 observations.
LambdaGrid make_grid(std::size_t n, double eta, std::size_t d_cols);

class RoutingTable {
 public:
  // IVZ: simulated limit for any persistence. OLS and IVX: simulated limit
  // when MI is declared, wild bootstrap for LUR and auto.
  static RoutingTable defaults();
  CritMethod route(TestKind kind, PersistenceDeclaration declaration) const;
  void set(TestKind kind, PersistenceDeclaration declaration, CritMethod method);

 private:
  std::map<std::pair<TestKind, PersistenceDeclaration>, CritMethod> entries_;
};

// Supplies a limit table holding (at least) the requested quantile levels.
using LimitTableProvider =
    std::function<CritTable(const LimitProcessId&, const std::vector<double>&)>;

// Simulates with the given settings, memoized in memory for the process.
LimitTableProvider memoized_limit_provider(SimulationSettings settings);
// memoized_limit_provider with default settings (grid 2000, 100000 reps),
// backed by the disk cache when QBREAK_CACHE_DIR is set.
LimitTableProvider default_limit_provider();

struct BreakTestOptions {
  PersistenceDeclaration persistence = PersistenceDeclaration::kAuto;
  RoutingTable routing = RoutingTable::defaults();
  std::vector<double> levels{0.10, 0.05, 0.01};  // nominal test sizes
  bool critical_values = true;
  std::size_t bootstrap_draws = 199;
  std::uint64_t seed = 7;
  // Replaces the estimated f(0) in Wald variances.
  std::optional<double> sparsity;
  unsigned threads = 1;
  LimitTableProvider limit_tables;  // empty: default_limit_provider()
};

struct DroppedLambda {
  double lambda = 0.0;
  std::size_t kappa = 0;
  std::string reason;
};

struct BreakTestResult {
  TestKind kind;
  std::vector<double> taus;
  std::size_t d_cols = 0;
  double statistic = 0.0;
  double lambda_hat = 0.0;
  std::size_t kappa_hat = 0;
  double tau_hat = 0.0;
  std::vector<double> path_lambdas;
  std::vector<double> path_values;
  std::map<double, double> crit;  // nominal level -> critical value
  std::map<double, bool> reject;
  CritMethod crit_method = CritMethod::kNone;
  std::vector<DroppedLambda> dropped;
  std::vector<std::string> diagnostics;
  std::optional<double> sparsity;        // f(0) used by Wald variances
  std::vector<BreakTestResult> per_tau;  // quantile-set tests only
};

// Fluctuation path ||M^{-1/2}(S(kappa) - (kappa/n) S(n))||_inf / sqrt(tau(1-tau))
// at every grid point, where S(kappa) = sum_{t <= kappa} w_t psi_t.
std::vector<double> fluctuation_path(const Vector& psi_values, const Matrix& weights,
                                     const Matrix& m_inv_sqrt, double tau,
                                     const LambdaGrid& grid);

BreakTestResult sq_test(Estimator estimator, const Sample& sample, QuantileLevel tau,
                        const LambdaGrid& grid, const IvxConfig& config,
                        const BreakTestOptions& options = {});
BreakTestResult sw_test(Estimator estimator, const Sample& sample, QuantileLevel tau,
                        const LambdaGrid& grid, const IvxConfig& config,
                        const BreakTestOptions& options = {});
BreakTestResult break_test(TestKind kind, const Sample& sample, QuantileLevel tau,
                           const LambdaGrid& grid, const IvxConfig& config,
                           const BreakTestOptions& options = {});

// Maximum of the fixed-quantile statistic over tau_set (each in [0.05, 0.95]);
// critical values from the wild bootstrap only.
BreakTestResult double_sup_test(TestKind kind, const Sample& sample,
                                const std::vector<double>& tau_set,
                                const LambdaGrid& grid, const IvxConfig& config,
                                const BreakTestOptions& options = {});

// Split-sample Wald statistic at kappa = floor(lambda0 n) with a chi-square
// p-value on d_cols degrees of freedom.
WaldResult known_break_wald(Estimator estimator, const Sample& sample,
                            QuantileLevel tau, double lambda0,
                            const IvxConfig& config,
                            const BreakTestOptions& options = {});

using StatisticFn = std::function<double(const Vector& y)>;

// Fixed-regressor wild bootstrap: y*_t = fitted_t + |residual_t| s_t with
// Rademacher s_t drawn from derive_seed(seed, b). Returns level -> empirical
// (1 - level) quantile of the recomputed statistics.
std::map<double, double> wild_bootstrap_critvals(
    const StatisticFn& statistic, const Vector& fitted, const Vector& residuals,
    std::size_t draws, std::uint64_t seed, const std::vector<double>& levels,
    unsigned threads = 1);
std::map<double, double> wild_bootstrap_critvals(
    const StatisticFn& statistic, const Sample& sample, const QrFit& fit,
    std::size_t draws, std::uint64_t seed, const std::vector<double>& levels,
    unsigned threads = 1);

}  // namespace qbreak

#endif  // QBREAK_BREAKTESTS_HPP_
