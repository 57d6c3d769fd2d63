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

// Release acceptance suite. Each criterion prints one PASS/FAIL line with the
// measured quantities; the process exits nonzero if any criterion fails.
// Tolerances below are fixed and must not be relaxed to make a run pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../unit/test_support.hpp"
#include "qbreak/breaktests.hpp"
#include "qbreak/ivx.hpp"
#include "qbreak/limitsim.hpp"
#include "qbreak/mcharness.hpp"
#include "qbreak/qrsolve.hpp"
#include "qbreak/rng.hpp"
#include "qbreak/serialize.hpp"
#include "qbreak/tsgen.hpp"

namespace {

using namespace qbreak;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// Oracles

// P(sup |BB| <= x) from the alternating Kolmogorov series.
double kolmogorov_cdf(double x) {
  double total = 0.0;
  for (int k = 1; k <= 100; ++k) {
    total += (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * x * x);
  }
  return 1.0 - 2.0 * total;
}

double kolmogorov_quantile(double level) {
  double lo = 0.3;
  double hi = 3.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (kolmogorov_cdf(mid) < level ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Closed-form chi-square(3) distribution function.
double chisq3_cdf(double x) {
  if (x <= 0.0) return 0.0;
  return std::erf(std::sqrt(0.5 * x)) -
         std::sqrt(2.0 * x / std::numbers::pi) * std::exp(-0.5 * x);
}

// Row r: sum_{j=0}^{r-1} rho_i^j (x_{r-j} - x_{r-j-1}); row 0 is zero.
Matrix instruments_by_double_sum(const Matrix& x, const IvxConfig& config) {
  const Eigen::Index n = x.rows();
  Matrix z = Matrix::Zero(n, x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const double rho =
        1.0 + config.c_z[i] / std::pow(static_cast<double>(n), config.gamma_z);
    for (Eigen::Index r = 1; r < n; ++r) {
      double total = 0.0;
      for (Eigen::Index j = 0; j < r; ++j) {
        total += std::pow(rho, static_cast<double>(j)) * (x(r - j, i) - x(r - j - 1, i));
      }
      z(r, i) = total;
    }
  }
  return z;
}

// ---------------------------------------------------------------------------
// Criteria

Outcome qr_exactness() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int k = 0; k < 500; ++k) {
    const auto inst = testing::random_instance(rng, 12, 3);
    const QuantileLevel tau(inst.tau);
    const double brute = testing::vertex_enumeration_minimum(inst.y, inst.design, tau);
    const QrFit fit = qr_fit(inst.y, inst.design, tau);
    worst = std::max(worst, std::abs(fit.objective - brute));
  }
  const double elapsed = seconds_since(start);
  return {worst <= 1e-9 && elapsed < 60.0,
          fmt("500 instances, max |objective - enumeration| = %.2e (tol 1e-9), %.1f s (limit 60 s)",
              worst, elapsed)};
}

Outcome qr_equivariance() {
  std::mt19937_64 rng(202);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> factor(0.2, 5.0);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const auto inst = testing::random_instance(rng, 200, 4);
    const QuantileLevel tau(inst.tau);
    const QrFit base = qr_fit(inst.y, inst.design, tau);
    const double a = factor(rng);
    Vector shift(inst.design.cols());
    for (Eigen::Index j = 0; j < shift.size(); ++j) shift[j] = normal(rng);
    // Scale: theta(a y, tau) = a theta(y, tau) for a > 0.
    const QrFit scaled = qr_fit(a * inst.y, inst.design, tau);
    // Regression: theta(y + X g, tau) = theta(y, tau) + g.
    const QrFit moved = qr_fit(inst.y + inst.design * shift, inst.design, tau);
    // Flip: theta(-y, 1 - tau) = -theta(y, tau).
    const QrFit flipped = qr_fit(-inst.y, inst.design, QuantileLevel(1.0 - inst.tau));
    worst = std::max({worst, (scaled.theta - a * base.theta).cwiseAbs().maxCoeff(),
                      (moved.theta - base.theta - shift).cwiseAbs().maxCoeff(),
                      (flipped.theta + base.theta).cwiseAbs().maxCoeff()});
  }
  return {worst <= 1e-8,
          fmt("200 instances x {scale, regression, flip}, max coefficient gap = %.2e (tol 1e-8)",
              worst)};
}

Outcome ivx_recursion() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> pick_n(20, 500);
  std::uniform_int_distribution<int> pick_p(1, 3);
  std::uniform_real_distribution<double> pick_cz(-5.0, -0.5);
  std::uniform_real_distribution<double> pick_gz(0.8, 0.99);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto n = static_cast<std::size_t>(pick_n(rng));
    const auto p = static_cast<std::size_t>(pick_p(rng));
    const Sample s = testing::persistent_sample(n, p, -1.0 - (k % 5), k % 2 ? 1.0 : 0.7, 9000 + k);
    IvxConfig config = IvxConfig::defaults(p);
    for (Eigen::Index i = 0; i < config.c_z.size(); ++i) config.c_z[i] = pick_cz(rng);
    config.gamma_z = pick_gz(rng);
    const Matrix rec = build_instruments(s.x_lagged, config);
    const Matrix direct = instruments_by_double_sum(s.x_lagged, config);
    const double scale = std::max(1.0, direct.cwiseAbs().maxCoeff());
    worst = std::max(worst, (rec - direct).cwiseAbs().maxCoeff() / scale);
  }
  return {worst <= 1e-12,
          fmt("100 paths, max relative gap to double sum = %.2e (tol 1e-12)", worst)};
}

Outcome brownian_bridge_table() {
  const auto start = std::chrono::steady_clock::now();
  SimulationSettings settings;
  settings.grid_steps = 2000;
  settings.reps = 100000;
  settings.threads = 0;
  const CritTable t = simulate_bb_sup(1, 0.0, settings);
  const double elapsed = seconds_since(start);
  const double q95 = t.quantile(0.95);
  const double q99 = t.quantile(0.99);
  const double o95 = kolmogorov_quantile(0.95);
  const double o99 = kolmogorov_quantile(0.99);
  const bool pass = std::abs(q95 - o95) <= 0.01 && std::abs(q99 - o99) <= 0.015 && elapsed < 120.0;
  return {pass, fmt("95%% %.4f vs %.4f (tol 0.01), 99%% %.4f vs %.4f (tol 0.015), %.1f s "
                    "(limit 120 s)",
                    q95, o95, q99, o99, elapsed)};
}

Outcome known_break_chisq() {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t reps = 2000;
  const Vector theta = (Vector(4) << 1.0, 0.0, 0.0, 0.0).finished();
  const PersistenceSpec persistence =
      PersistenceSpec::mildly_integrated(Vector::Constant(3, -1.0), 0.75);
  const IvxConfig config = IvxConfig::defaults(3);
  std::vector<double> stats;
  std::size_t failures = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    const Sample s = gen_sample(BreakScenario::null(theta), persistence,
                                InnovationSpec::standard(3), 1000, derive_seed(505, r));
    try {
      stats.push_back(
          known_break_wald(Estimator::kIVZ, s, QuantileLevel(0.5), 0.5, config).statistic);
    } catch (const std::exception&) {
      ++failures;
    }
  }
  std::sort(stats.begin(), stats.end());
  const auto m = static_cast<double>(stats.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double f = chisq3_cdf(stats[i]);
    ks = std::max({ks, std::abs(f - static_cast<double>(i) / m),
                   std::abs(f - static_cast<double>(i + 1) / m)});
  }
  const double elapsed = seconds_since(start);
  return {ks < 0.05 && failures == 0 && elapsed < 900.0,
          fmt("%zu reps, KS distance to chi2(3) = %.4f (tol 0.05), %zu failures, %.1f s "
              "(limit 900 s)",
              stats.size(), ks, failures, elapsed)};
}

ExperimentConfig ivz_experiment(std::size_t n, std::size_t reps) {
  ExperimentConfig c;
  c.n_list = {n};
  c.c_list = {-1.0};
  c.gamma_x_list = {0.75};
  c.tau_list = {0.5};
  c.reps = reps;
  c.scenario = BreakScenario::null((Vector(4) << 1.0, 0.0, 0.0, 0.0).finished());
  c.declared = PersistenceDeclaration::kMI;
  return c;
}

Outcome empirical_size() {
  const auto start = std::chrono::steady_clock::now();
  ExperimentConfig c = ivz_experiment(500, 1000);
  c.tests = {{StatisticType::kSW, Estimator::kIVZ}, {StatisticType::kSQ, Estimator::kIVZ}};
  const McReport r = run_size(c);
  const double elapsed = seconds_since(start);
  bool pass = elapsed < 1200.0;
  std::ostringstream detail;
  for (const auto& [key, cell] : r.cells) {
    const bool ok = cell.rejection_rate >= 0.025 && cell.rejection_rate <= 0.08;
    pass = pass && ok && cell.rep_count > 0;
    detail << to_string(key.test) << fmt(" %.3f", cell.rejection_rate)
           << (ok ? "" : " (outside)") << fmt(" over %zu reps", cell.rep_count) << ", ";
  }
  detail << fmt("band [0.025, 0.08], %.1f s (limit 1200 s)", elapsed);
  return {pass, detail.str()};
}

Outcome sparsity_independence() {
  std::size_t compared = 0;
  std::size_t differing = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const std::size_t p = 1 + k % 3;
    const std::size_t n = 150 + 25 * (k % 4);
    const Sample s = testing::persistent_sample(n, p, -1.0 - (k % 3), k % 2 ? 1.0 : 0.75, 700 + k,
                                                1.0, 0.2);
    const QuantileLevel tau(k % 5 == 0 ? 0.25 : 0.5);
    const IvxConfig config = IvxConfig::defaults(p);
    const double f_hat = estimate_sparsity(dequantile(s.y, s, tau).fit, s.design()).value;
    for (const Estimator e : {Estimator::kOLS, Estimator::kIVZ, Estimator::kIVX}) {
      const LambdaGrid grid = make_grid(n, 0.15, design_columns(e, p));
      BreakTestOptions plain = testing::quick_options();
      plain.persistence = PersistenceDeclaration::kMI;
      BreakTestOptions perturbed = plain;
      perturbed.sparsity = 10.0 * f_hat;
      const std::string a = to_json(sq_test(e, s, tau, grid, config, plain)).dump();
      const std::string b = to_json(sq_test(e, s, tau, grid, config, perturbed)).dump();
      ++compared;
      differing += a != b;
    }
  }
  return {differing == 0,
          fmt("20 fixtures x 3 estimators, %zu of %zu reports differ under f x 10", differing,
              compared)};
}

Outcome monotone_power() {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<std::size_t> sizes{250, 500, 1000};
  const Vector null_theta = (Vector(4) << 1.0, 0.0, 0.0, 0.0).finished();
  const Vector shifted = (Vector(4) << 1.0, 0.5, 0.5, 0.5).finished();
  ExperimentConfig c = ivz_experiment(250, 500);
  c.n_list = sizes;
  c.tests = {{StatisticType::kSW, Estimator::kIVZ}};
  const McReport size = run_size(c);
  c.scenario = BreakScenario::single_break(null_theta, shifted, 0.5);
  const McReport power = run_power(c);
  std::vector<double> pow_rates;
  std::vector<double> null_rates;
  for (const std::size_t n : sizes) {
    const CellKey key{n, -1.0, 0.75, 0.5, c.tests.front()};
    pow_rates.push_back(power.cells.at(key).rejection_rate);
    null_rates.push_back(size.cells.at(key).rejection_rate);
  }
  bool pass = true;
  std::ostringstream detail;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    pass = pass && pow_rates[i] > null_rates[i];
    if (i > 0) pass = pass && pow_rates[i] > pow_rates[i - 1];
    detail << fmt("n=%zu power %.3f null %.3f, ", sizes[i], pow_rates[i], null_rates[i]);
  }
  detail << fmt("%.1f s", seconds_since(start));
  return {pass, detail.str()};
}

Outcome ou_degeneration() {
  const LimitTableProvider tables = memoized_limit_provider(SimulationSettings{});
  const std::vector<double> levels{0.95};
  const CritTable ou =
      tables({LimitFamily::kOuWaldLur, 1, 0.15, Vector::Constant(1, -200.0), {}}, levels);
  const CritTable andrews = tables({LimitFamily::kBbSupNormalizedSq, 1, 0.15, {}, {}}, levels);
  const double a = ou.quantile(0.95);
  const double b = andrews.quantile(0.95);
  const double rel = std::abs(a - b) / b;
  return {rel <= 0.05, fmt("95%%: OU(c=-200) %.4f vs normalized-bridge %.4f, relative gap %.2f%% (tol 5%%)",
                           a, b, 100.0 * rel)};
}

Outcome determinism() {
  const std::vector<unsigned> thread_counts{1, 4, 16};
  std::size_t mismatches = 0;
  std::size_t checks = 0;
  auto compare = [&](const std::function<std::string(unsigned)>& run) {
    const std::string reference = run(thread_counts.front());
    for (std::size_t i = 1; i < thread_counts.size(); ++i) {
      ++checks;
      mismatches += run(thread_counts[i]) != reference;
    }
  };

  // Monte Carlo: bootstrap-routed OLS tests alongside simulated-limit IVZ tests.
  ExperimentConfig mc;
  mc.n_list = {120, 160};
  mc.c_list = {-2.0};
  mc.gamma_x_list = {0.75, 1.0};
  mc.tau_list = {0.5};
  mc.tests = {{StatisticType::kSW, Estimator::kIVZ},
              {StatisticType::kSQ, Estimator::kOLS},
              {StatisticType::kSW, Estimator::kOLS}};
  mc.reps = 4;
  mc.bootstrap_draws = 99;
  mc.scenario = BreakScenario::null((Vector(3) << 1.0, 0.0, 0.0).finished());
  mc.ivx = IvxConfig::defaults(2);
  mc.limit_settings.grid_steps = 1000;
  mc.limit_settings.reps = 10000;
  compare([&](unsigned threads) {
    ExperimentConfig c = mc;
    c.threads = threads;
    return emit_tables(run_size(c), TableFormat::kJson);
  });
  compare([&](unsigned threads) {
    ExperimentConfig c = mc;
    c.threads = threads;
    c.scenario = BreakScenario::single_break(mc.scenario.theta1,
                                             (Vector(3) << 1.0, 0.5, 0.5).finished(), 0.5);
    return emit_tables(run_power(c), TableFormat::kJson);
  });

  // Wild bootstrap: single-quantile and quantile-set tests.
  const Sample s = testing::persistent_sample(150, 2, -1.0, 1.0, 77);
  const LambdaGrid grid = make_grid(150, 0.15, 3);
  compare([&](unsigned threads) {
    BreakTestOptions o = testing::quick_options();
    o.persistence = PersistenceDeclaration::kLUR;
    o.bootstrap_draws = 99;
    o.threads = threads;
    return to_json(sq_test(Estimator::kOLS, s, QuantileLevel(0.5), grid, IvxConfig::defaults(2),
                           o))
               .dump() +
           to_json(double_sup_test({StatisticType::kSQ, Estimator::kIVZ}, s, {0.25, 0.5, 0.75},
                                   grid, IvxConfig::defaults(2), o))
               .dump();
  });

  // Limit simulations.
  compare([&](unsigned threads) {
    SimulationSettings settings;
    settings.grid_steps = 1000;
    settings.reps = 10000;
    settings.threads = threads;
    return to_json(simulate_bb_sup(2, 0.15, settings)).dump() +
           to_json(simulate_andrews_sup(2, 0.15, settings)).dump() +
           to_json(simulate_ou_wald_lur(2, 0.15, Vector::Constant(2, -5.0), settings)).dump();
  });

  return {mismatches == 0, fmt("%zu of %zu comparisons at 4 and 16 threads differ from 1 thread",
                               mismatches, checks)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"QR solver exactness", qr_exactness},
      {"QR equivariance", qr_equivariance},
      {"IVX recursion vs double sum", ivx_recursion},
      {"Brownian bridge table", brownian_bridge_table},
      {"Known-break chi-square convergence", known_break_chisq},
      {"Empirical size of IVZ tests", empirical_size},
      {"SQ sparsity independence", sparsity_independence},
      {"Monotone power of IVZ sup-Wald", monotone_power},
      {"OU limit degenerates to the MI table", ou_degeneration},
      {"Determinism across thread counts", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    failed += !out.pass;
    std::printf("%s  %2zu. %s: %s\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu of %zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed),
              criteria.size());
  return failed == 0 ? 0 : 1;
}
