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

#include "qbreak/breaktests.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <memory>
#include <mutex>
#include <utility>

#include "qbreak/distributions.hpp"
#include "qbreak/error.hpp"
#include "qbreak/parallel.hpp"
#include "qbreak/rng.hpp"

namespace qbreak {
namespace {

constexpr const char* kModule = "breaktests";
// Grid points per warm-started block; fixed so results do not depend on the
// worker count.
constexpr std::size_t kBlock = 32;

std::string normalize(const std::string& text) {
  std::string out;
  for (char ch : text) {
    out += ch == '_' ? '-' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  }
  return out;
}

struct PathOutcome {
  std::vector<std::size_t> kappas;
  std::vector<double> values;
  std::vector<DroppedLambda> dropped;
  std::vector<std::string> diagnostics;
  std::optional<double> sparsity;
  bool force_bootstrap = false;
};

struct Slot {
  bool ok = false;
  double value = 0.0;
  std::string reason;
  bool unconverged = false;
};

Sample with_response(const Sample& sample, const Vector& y) {
  Sample s;
  s.y = y;
  s.x_lagged = sample.x_lagged;
  s.has_intercept = sample.has_intercept;
  return s;
}

void check_grid(const LambdaGrid& grid, const Sample& sample) {
  if (grid.n != sample.n()) {
    throw_invalid(kModule, "grid was built for n = " + std::to_string(grid.n) +
                               " but the sample has n = " + std::to_string(sample.n()));
  }
  if (grid.indices.empty()) throw_invalid(kModule, "empty grid");
}

PathOutcome sq_path(Estimator estimator, const Sample& sample, QuantileLevel tau,
                    const LambdaGrid& grid, const IvxConfig& config) {
  PathOutcome out;
  Vector psi_values;
  Matrix weights;
  Matrix m;
  if (estimator == Estimator::kOLS) {
    const Matrix design = sample.design();
    QrFit fit = qr_fit(sample.y, design, tau);
    psi_values = std::move(fit.psi_values);
    m = design.transpose() * design;
    weights = design;
  } else {
    const Matrix z = build_instruments(sample.x_lagged, config);
    const Dequantiled dq = dequantile(sample.y, sample, tau);
    if (estimator == Estimator::kIVZ) {
      psi_values = ivz_fit(dq.y_tau, z, tau).psi_values;
      m = z.transpose() * z;
    } else {
      IvxFit fit = ivx_fit(dq.y_tau, sample.x_lagged, z, tau);
      if (!fit.converged) out.diagnostics.push_back("IVX fit: " + fit.diagnostic);
      psi_values = std::move(fit.psi_values);
      const Matrix xz = sample.x_lagged.transpose() * z;
      m = 0.5 * (xz + xz.transpose());
      if (!symmetric_inverse_sqrt(m)) {
        out.diagnostics.push_back(
            "symmetrized X'Z is not positive definite; normalizing by Z'Z and "
            "using bootstrap critical values");
        out.force_bootstrap = true;
        m = z.transpose() * z;
      }
    }
    weights = z;
  }
  auto root = symmetric_inverse_sqrt(m);
  if (!root) throw_numerical(kModule, "fluctuation normalizer is not positive definite");
  out.kappas = grid.indices;
  out.values = fluctuation_path(psi_values, weights, *root, tau, grid);
  return out;
}

// Runs eval(kappa, previous basis 1, previous basis 2) over the grid in
// fixed blocks, warm-starting within a block.
template <typename Eval>
std::vector<Slot> run_blocks(const LambdaGrid& grid, unsigned threads, const Eval& eval) {
  std::vector<Slot> slots(grid.size());
  const std::size_t blocks = (grid.size() + kBlock - 1) / kBlock;
  parallel_for(blocks, threads, [&](std::size_t b) {
    std::vector<std::size_t> basis1;
    std::vector<std::size_t> basis2;
    std::size_t prev_kappa = 0;
    const std::size_t end = std::min(grid.size(), (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      const std::size_t kappa = grid.indices[i];
      std::vector<std::size_t> warm2;
      if (!basis2.empty()) {
        const std::size_t shift = kappa - prev_kappa;
        bool valid = true;
        for (std::size_t r : basis2) {
          if (r < shift) {
            valid = false;
            break;
          }
          warm2.push_back(r - shift);
        }
        if (!valid) warm2.clear();
      }
      slots[i] = eval(kappa, basis1, warm2, basis1, basis2);
      prev_kappa = kappa;
    }
  });
  return slots;
}

// Split regressions of yy on r with the OLS / IVZ variance formula.
std::vector<Slot> split_qr_path(const Vector& yy, const Matrix& r, QuantileLevel tau,
                                double scale, const LambdaGrid& grid, unsigned threads) {
  const Eigen::Index n = r.rows();
  return run_blocks(grid, threads, [&](std::size_t kappa, const std::vector<std::size_t>& warm1,
                                       const std::vector<std::size_t>& warm2,
                                       std::vector<std::size_t>& basis1,
                                       std::vector<std::size_t>& basis2) {
    Slot slot;
    const auto k = static_cast<Eigen::Index>(kappa);
    const Matrix r1 = r.topRows(k);
    const Matrix r2 = r.bottomRows(n - k);
    auto inv1 = spd_inverse(r1.transpose() * r1);
    auto inv2 = spd_inverse(r2.transpose() * r2);
    if (!inv1 || !inv2) {
      slot.reason = "regime design is rank deficient";
      basis1.clear();
      basis2.clear();
      return slot;
    }
    try {
      QrOptions o1;
      o1.warm_basis = warm1;
      QrFit f1 = qr_fit(yy.head(k), r1, tau, o1);
      QrOptions o2;
      o2.warm_basis = warm2;
      QrFit f2 = qr_fit(yy.tail(n - k), r2, tau, o2);
      basis1 = std::move(f1.basis);
      basis2 = std::move(f2.basis);
      auto q = inverse_quadratic_form(*inv1 + *inv2, f2.theta - f1.theta);
      if (!q) {
        slot.reason = "split-sample variance is singular";
        return slot;
      }
      slot.ok = true;
      slot.value = scale * *q;
    } catch (const Error& e) {
      basis1.clear();
      basis2.clear();
      slot.reason = e.what();
    }
    return slot;
  });
}

std::vector<Slot> split_ivx_path(const Vector& y_tau, const Matrix& x, QuantileLevel tau,
                                 double scale, const LambdaGrid& grid,
                                 const IvxConfig& config, unsigned threads) {
  const Eigen::Index n = x.rows();
  auto regime_q = [&](const Matrix& xi, const Matrix& zi) -> std::optional<Matrix> {
    auto g = general_inverse(zi.transpose() * xi);
    if (!g) return std::nullopt;
    return Matrix(*g * (zi.transpose() * zi) * g->transpose());
  };
  return run_blocks(grid, threads, [&](std::size_t kappa, const std::vector<std::size_t>&,
                                       const std::vector<std::size_t>&,
                                       std::vector<std::size_t>&, std::vector<std::size_t>&) {
    Slot slot;
    const auto k = static_cast<Eigen::Index>(kappa);
    const Matrix x1 = x.topRows(k);
    const Matrix x2 = x.bottomRows(n - k);
    const auto full_n = static_cast<std::size_t>(n);
    const Matrix z1 = build_instruments(x1, config, full_n);
    const Matrix z2 = build_instruments(x2, config, full_n);
    auto q1 = regime_q(x1, z1);
    auto q2 = regime_q(x2, z2);
    if (!q1 || !q2) {
      slot.reason = "regime instrument moment matrix is singular";
      return slot;
    }
    try {
      const IvxFit f1 = ivx_fit(y_tau.head(k), x1, z1, tau);
      const IvxFit f2 = ivx_fit(y_tau.tail(n - k), x2, z2, tau);
      slot.unconverged = !f1.converged || !f2.converged;
      auto q = inverse_quadratic_form(*q1 + *q2, f2.beta - f1.beta);
      if (!q) {
        slot.reason = "split-sample variance is singular";
        return slot;
      }
      slot.ok = true;
      slot.value = scale * *q;
    } catch (const Error& e) {
      slot.reason = e.what();
    }
    return slot;
  });
}

PathOutcome sw_path(Estimator estimator, const Sample& sample, QuantileLevel tau,
                    const LambdaGrid& grid, const IvxConfig& config,
                    const std::optional<double>& sparsity_override, unsigned threads) {
  PathOutcome out;
  const Matrix design = sample.design();
  const QrFit full = qr_fit(sample.y, design, tau);
  double f = 0.0;
  if (sparsity_override) {
    f = *sparsity_override;
    if (!(f > 0.0)) throw_invalid(kModule, "sparsity override must be positive");
  } else {
    const SparsityEstimate est = estimate_sparsity(full, design);
    if (est.used_fallback) {
      out.diagnostics.push_back("sparsity from kernel density fallback (quantile crossing)");
    }
    f = est.value;
  }
  out.sparsity = f;
  const double t = tau.value();
  const double scale = f * f / (t * (1.0 - t));

  std::vector<Slot> slots;
  if (estimator == Estimator::kOLS) {
    slots = split_qr_path(sample.y, design, tau, scale, grid, threads);
  } else {
    if (!sample.has_intercept) {
      throw_invalid(kModule, "IVX and IVZ tests need a sample with an intercept");
    }
    const Vector y_tau = sample.y.array() - full.theta[0];
    if (estimator == Estimator::kIVZ) {
      const Matrix z = build_instruments(sample.x_lagged, config);
      slots = split_qr_path(y_tau, z, tau, scale, grid, threads);
    } else {
      slots = split_ivx_path(y_tau, sample.x_lagged, tau, scale, grid, config, threads);
    }
  }
  std::size_t unconverged = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].unconverged) ++unconverged;
    if (slots[i].ok) {
      out.kappas.push_back(grid.indices[i]);
      out.values.push_back(slots[i].value);
    } else {
      out.dropped.push_back({grid.fractions[i], grid.indices[i], slots[i].reason});
    }
  }
  if (unconverged > 0) {
    out.diagnostics.push_back("IVX first-order condition above tolerance at " +
                              std::to_string(unconverged) + " grid points");
  }
  return out;
}

PathOutcome compute_path(TestKind kind, const Sample& sample, QuantileLevel tau,
                         const LambdaGrid& grid, const IvxConfig& config,
                         const BreakTestOptions& options) {
  if (kind.statistic == StatisticType::kSQ) {
    return sq_path(kind.estimator, sample, tau, grid, config);
  }
  return sw_path(kind.estimator, sample, tau, grid, config, options.sparsity,
                 options.threads);
}

double path_max(const PathOutcome& out) {
  if (out.values.empty()) throw_numerical(kModule, "every grid point was dropped");
  return *std::max_element(out.values.begin(), out.values.end());
}

BreakTestResult assemble(TestKind kind, double tau, const LambdaGrid& grid,
                         PathOutcome&& out) {
  BreakTestResult r;
  r.kind = kind;
  r.taus = {tau};
  r.tau_hat = tau;
  r.d_cols = 0;
  r.dropped = std::move(out.dropped);
  r.diagnostics = std::move(out.diagnostics);
  r.sparsity = out.sparsity;
  if (out.values.empty()) throw_numerical(kModule, "every grid point was dropped");
  const double n = static_cast<double>(grid.n);
  std::size_t best = 0;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    r.path_lambdas.push_back(static_cast<double>(out.kappas[i]) / n);
    if (out.values[i] > out.values[best]) best = i;
  }
  r.path_values = std::move(out.values);
  r.statistic = r.path_values[best];
  r.kappa_hat = out.kappas[best];
  r.lambda_hat = r.path_lambdas[best];
  return r;
}

std::vector<double> upper_levels(const std::vector<double>& levels) {
  std::vector<double> q;
  for (double a : levels) {
    if (!(a > 0.0 && a < 1.0)) throw_invalid(kModule, "nominal levels must lie in (0, 1)");
    q.push_back(1.0 - a);
  }
  return q;
}

void set_decisions(BreakTestResult& r) {
  r.reject.clear();
  for (const auto& [level, cv] : r.crit) r.reject[level] = r.statistic > cv;
}

std::size_t nearest_median(const std::vector<double>& taus) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < taus.size(); ++i) {
    if (std::abs(taus[i] - 0.5) < std::abs(taus[best] - 0.5)) best = i;
  }
  return best;
}

// Bootstrap critical values for statistic(y*) around the full-sample
// quantile regression of y on (1, x) at base_tau.
std::map<double, double> bootstrap_for(const Sample& sample, QuantileLevel base_tau,
                                       const BreakTestOptions& options,
                                       const std::function<double(const Sample&)>& statistic) {
  const Matrix design = sample.design();
  const QrFit base = qr_fit(sample.y, design, base_tau);
  return wild_bootstrap_critvals(
      [&](const Vector& y_star) { return statistic(with_response(sample, y_star)); },
      base.fitted(design), base.residuals, options.bootstrap_draws, options.seed,
      options.levels, options.threads);
}

BreakTestResult fixed_tau_test(TestKind kind, const Sample& sample, QuantileLevel tau,
                               const LambdaGrid& grid, const IvxConfig& config,
                               const BreakTestOptions& options) {
  sample.validate();
  check_grid(grid, sample);
  PathOutcome out = compute_path(kind, sample, tau, grid, config, options);
  const bool force_bootstrap = out.force_bootstrap;
  BreakTestResult r = assemble(kind, tau.value(), grid, std::move(out));
  r.d_cols = design_columns(kind.estimator, sample.p());
  if (!options.critical_values) return r;

  CritMethod method = options.routing.route(kind, options.persistence);
  if (force_bootstrap && method == CritMethod::kSimulatedLimit) {
    method = CritMethod::kWildBootstrap;
  }
  r.crit_method = method;
  switch (method) {
    case CritMethod::kSimulatedLimit: {
      LimitProcessId id;
      id.family = kind.statistic == StatisticType::kSQ ? LimitFamily::kBbSupInfNorm
                                                       : LimitFamily::kBbSupNormalizedSq;
      id.p = r.d_cols;
      id.eta = grid.eta;
      const std::vector<double> q = upper_levels(options.levels);
      const LimitTableProvider provider =
          options.limit_tables ? options.limit_tables : default_limit_provider();
      const CritTable table = provider(id, q);
      for (double a : options.levels) r.crit[a] = table.quantile(1.0 - a);
      break;
    }
    case CritMethod::kWildBootstrap: {
      BreakTestOptions inner = options;
      inner.critical_values = false;
      inner.threads = 1;
      r.crit = bootstrap_for(sample, tau, options, [&](const Sample& s) {
        return path_max(compute_path(kind, s, tau, grid, config, inner));
      });
      break;
    }
    case CritMethod::kChiSquare:
      throw_invalid(kModule, "chi-square critical values apply to known-break tests only");
    case CritMethod::kNone:
      break;
  }
  set_decisions(r);
  return r;
}

}  // namespace

const char* to_string(Estimator estimator) {
  switch (estimator) {
    case Estimator::kOLS: return "OLS";
    case Estimator::kIVX: return "IVX";
    case Estimator::kIVZ: return "IVZ";
  }
  return "?";
}

Estimator estimator_from_string(const std::string& text) {
  const std::string t = normalize(text);
  if (t == "OLS") return Estimator::kOLS;
  if (t == "IVX") return Estimator::kIVX;
  if (t == "IVZ") return Estimator::kIVZ;
  throw_invalid(kModule, "unknown estimator '" + text + "'");
}

std::string to_string(TestKind kind) {
  return std::string(kind.statistic == StatisticType::kSQ ? "SQ-" : "SW-") +
         to_string(kind.estimator);
}

TestKind test_kind_from_string(const std::string& text) {
  const std::string t = normalize(text);
  if (t.size() < 4 || t[2] != '-') throw_invalid(kModule, "unknown test kind '" + text + "'");
  TestKind kind;
  const std::string stat = t.substr(0, 2);
  if (stat == "SQ") {
    kind.statistic = StatisticType::kSQ;
  } else if (stat == "SW") {
    kind.statistic = StatisticType::kSW;
  } else {
    throw_invalid(kModule, "unknown test kind '" + text + "'");
  }
  kind.estimator = estimator_from_string(t.substr(3));
  return kind;
}

const char* to_string(CritMethod method) {
  switch (method) {
    case CritMethod::kSimulatedLimit: return "SIMULATED_LIMIT";
    case CritMethod::kWildBootstrap: return "WILD_BOOTSTRAP";
    case CritMethod::kChiSquare: return "CHI_SQUARE";
    case CritMethod::kNone: return "NONE";
  }
  return "?";
}

CritMethod crit_method_from_string(const std::string& text) {
  const std::string t = normalize(text);
  if (t == "SIMULATED-LIMIT" || t == "SIMULATED" || t == "LIMIT") return CritMethod::kSimulatedLimit;
  if (t == "WILD-BOOTSTRAP" || t == "BOOTSTRAP") return CritMethod::kWildBootstrap;
  if (t == "CHI-SQUARE" || t == "CHISQ") return CritMethod::kChiSquare;
  if (t == "NONE") return CritMethod::kNone;
  throw_invalid(kModule, "unknown critical value method '" + text + "'");
}

const char* to_string(PersistenceDeclaration declaration) {
  switch (declaration) {
    case PersistenceDeclaration::kLUR: return "lur";
    case PersistenceDeclaration::kMI: return "mi";
    case PersistenceDeclaration::kAuto: return "auto";
  }
  return "?";
}

PersistenceDeclaration persistence_declaration_from_string(const std::string& text) {
  const std::string t = normalize(text);
  if (t == "LUR") return PersistenceDeclaration::kLUR;
  if (t == "MI") return PersistenceDeclaration::kMI;
  if (t == "AUTO") return PersistenceDeclaration::kAuto;
  throw_invalid(kModule, "persistence must be one of lur, mi, auto (got '" + text + "')");
}

std::size_t design_columns(Estimator estimator, std::size_t p) {
  return estimator == Estimator::kOLS ? p + 1 : p;
}

LambdaGrid make_grid(std::size_t n, double eta, std::size_t d_cols) {
  if (!(eta > 0.0 && eta < 0.5)) throw_invalid(kModule, "eta must lie in (0, 0.5)");
  if (d_cols == 0) throw_invalid(kModule, "d_cols must be positive");
  const double nd = static_cast<double>(n);
  const auto lo = static_cast<long long>(std::ceil(eta * nd - 1e-9));
  const auto hi = static_cast<long long>(std::floor((1.0 - eta) * nd + 1e-9));
  if (lo > hi || lo < 1 || hi >= static_cast<long long>(n)) {
    throw_invalid(kModule, "trimmed break-fraction range is empty for n = " + std::to_string(n));
  }
  const auto need = static_cast<long long>(d_cols) + 1;
  if (lo < need || static_cast<long long>(n) - hi < need) {
    throw_invalid(kModule, "each regime needs at least " + std::to_string(need) +
                               " observations; n = " + std::to_string(n) +
                               " with eta = " + std::to_string(eta) + " is too short");
  }
  LambdaGrid grid;
  grid.n = n;
  grid.eta = eta;
  for (long long k = lo; k <= hi; ++k) {
    grid.indices.push_back(static_cast<std::size_t>(k));
    grid.fractions.push_back(static_cast<double>(k) / nd);
  }
  return grid;
}

RoutingTable RoutingTable::defaults() {
  RoutingTable t;
  for (StatisticType s : {StatisticType::kSQ, StatisticType::kSW}) {
    for (Estimator e : {Estimator::kOLS, Estimator::kIVX, Estimator::kIVZ}) {
      for (PersistenceDeclaration d : {PersistenceDeclaration::kLUR, PersistenceDeclaration::kMI,
                                       PersistenceDeclaration::kAuto}) {
        const bool limit = e == Estimator::kIVZ || d == PersistenceDeclaration::kMI;
        t.set({s, e}, d, limit ? CritMethod::kSimulatedLimit : CritMethod::kWildBootstrap);
      }
    }
  }
  return t;
}

CritMethod RoutingTable::route(TestKind kind, PersistenceDeclaration declaration) const {
  const auto it = entries_.find({kind, declaration});
  return it == entries_.end() ? CritMethod::kWildBootstrap : it->second;
}

void RoutingTable::set(TestKind kind, PersistenceDeclaration declaration, CritMethod method) {
  entries_[{kind, declaration}] = method;
}

LimitTableProvider memoized_limit_provider(SimulationSettings settings) {
  struct State {
    std::mutex mutex;
    std::map<std::string, CritTable> tables;
  };
  auto state = std::make_shared<State>();
  return [state, settings](const LimitProcessId& id, const std::vector<double>& levels) {
    SimulationSettings s = settings;
    for (double l : levels) {
      if (std::none_of(s.levels.begin(), s.levels.end(),
                       [&](double v) { return std::abs(v - l) < 1e-12; })) {
        s.levels.push_back(l);
      }
    }
    std::sort(s.levels.begin(), s.levels.end());
    nlohmann::json key = to_json(id);
    key["levels"] = s.levels;
    const std::string k = key.dump();
    std::lock_guard<std::mutex> lock(state->mutex);
    auto it = state->tables.find(k);
    if (it != state->tables.end()) return it->second;
    CritTable table;
    if (std::getenv("QBREAK_CACHE_DIR") != nullptr) {
      CritCache cache = CritCache::from_environment();
      table = cache.get_or_compute(id, s).table;
    } else {
      table = simulate_limit(id, s);
    }
    state->tables.emplace(k, table);
    return table;
  };
}

LimitTableProvider default_limit_provider() {
  static const LimitTableProvider provider = memoized_limit_provider(SimulationSettings{});
  return provider;
}

std::vector<double> fluctuation_path(const Vector& psi_values, const Matrix& weights,
                                     const Matrix& m_inv_sqrt, double tau,
                                     const LambdaGrid& grid) {
  const Eigen::Index n = weights.rows();
  if (psi_values.size() != n || m_inv_sqrt.rows() != weights.cols()) {
    throw_invalid(kModule, "fluctuation inputs do not conform");
  }
  const Vector total = weights.transpose() * psi_values;
  const double denom = std::sqrt(tau * (1.0 - tau));
  std::vector<double> values;
  values.reserve(grid.size());
  Vector partial = Vector::Zero(weights.cols());
  Eigen::Index t = 0;
  for (std::size_t kappa : grid.indices) {
    if (static_cast<Eigen::Index>(kappa) > n) throw_invalid(kModule, "grid index beyond sample");
    for (; t < static_cast<Eigen::Index>(kappa); ++t) {
      partial.noalias() += weights.row(t).transpose() * psi_values[t];
    }
    const double lam = static_cast<double>(kappa) / static_cast<double>(n);
    const Vector centered = m_inv_sqrt * (partial - lam * total);
    values.push_back(centered.cwiseAbs().maxCoeff() / denom);
  }
  return values;
}

BreakTestResult sq_test(Estimator estimator, const Sample& sample, QuantileLevel tau,
                        const LambdaGrid& grid, const IvxConfig& config,
                        const BreakTestOptions& options) {
  return fixed_tau_test({StatisticType::kSQ, estimator}, sample, tau, grid, config, options);
}

BreakTestResult sw_test(Estimator estimator, const Sample& sample, QuantileLevel tau,
                        const LambdaGrid& grid, const IvxConfig& config,
                        const BreakTestOptions& options) {
  return fixed_tau_test({StatisticType::kSW, estimator}, sample, tau, grid, config, options);
}

BreakTestResult break_test(TestKind kind, const Sample& sample, QuantileLevel tau,
                           const LambdaGrid& grid, const IvxConfig& config,
                           const BreakTestOptions& options) {
  return fixed_tau_test(kind, sample, tau, grid, config, options);
}

BreakTestResult double_sup_test(TestKind kind, const Sample& sample,
                                const std::vector<double>& tau_set,
                                const LambdaGrid& grid, const IvxConfig& config,
                                const BreakTestOptions& options) {
  if (tau_set.empty()) throw_invalid(kModule, "quantile set is empty");
  for (double t : tau_set) {
    if (!(t >= 0.05 - 1e-12 && t <= 0.95 + 1e-12)) {
      throw_invalid(kModule, "quantile set must lie inside [0.05, 0.95]");
    }
  }
  BreakTestOptions inner = options;
  inner.critical_values = false;
  BreakTestResult r;
  r.kind = kind;
  r.taus = tau_set;
  for (double t : tau_set) {
    r.per_tau.push_back(fixed_tau_test(kind, sample, QuantileLevel(t), grid, config, inner));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < r.per_tau.size(); ++i) {
    if (r.per_tau[i].statistic > r.per_tau[best].statistic) best = i;
  }
  const BreakTestResult& top = r.per_tau[best];
  r.d_cols = top.d_cols;
  r.statistic = top.statistic;
  r.lambda_hat = top.lambda_hat;
  r.kappa_hat = top.kappa_hat;
  r.tau_hat = top.tau_hat;
  r.path_lambdas = top.path_lambdas;
  r.path_values = top.path_values;
  r.sparsity = top.sparsity;
  for (const BreakTestResult& pt : r.per_tau) {
    for (const std::string& d : pt.diagnostics) {
      r.diagnostics.push_back("tau " + std::to_string(pt.tau_hat) + ": " + d);
    }
  }
  if (!options.critical_values) return r;
  r.crit_method = CritMethod::kWildBootstrap;
  inner.threads = 1;
  const QuantileLevel base_tau(tau_set[nearest_median(tau_set)]);
  r.crit = bootstrap_for(sample, base_tau, options, [&](const Sample& s) {
    double m = 0.0;
    for (double t : tau_set) {
      m = std::max(m, path_max(compute_path(kind, s, QuantileLevel(t), grid, config, inner)));
    }
    return m;
  });
  set_decisions(r);
  return r;
}

WaldResult known_break_wald(Estimator estimator, const Sample& sample, QuantileLevel tau,
                            double lambda0, const IvxConfig& config,
                            const BreakTestOptions& options) {
  sample.validate();
  if (!(lambda0 > 0.0 && lambda0 < 1.0)) throw_invalid(kModule, "lambda0 must lie in (0, 1)");
  const std::size_t n = sample.n();
  const std::size_t d = design_columns(estimator, sample.p());
  const auto kappa = static_cast<std::size_t>(std::floor(lambda0 * static_cast<double>(n) + 1e-9));
  if (kappa < d + 1 || n - kappa < d + 1) {
    throw_invalid(kModule, "known break leaves a regime with fewer than d + 1 observations");
  }
  LambdaGrid grid;
  grid.n = n;
  grid.eta = std::min(lambda0, 1.0 - lambda0);
  grid.indices = {kappa};
  grid.fractions = {static_cast<double>(kappa) / static_cast<double>(n)};
  const PathOutcome out = sw_path(estimator, sample, tau, grid, config, options.sparsity, 1);
  if (out.values.empty()) {
    throw_numerical(kModule, "Wald statistic undefined at the known break: " +
                                 out.dropped.front().reason);
  }
  WaldResult w;
  w.statistic = out.values.front();
  w.df = static_cast<int>(d);
  w.p_value = chisq_survival(w.df, w.statistic);
  return w;
}

std::map<double, double> wild_bootstrap_critvals(
    const StatisticFn& statistic, const Vector& fitted, const Vector& residuals,
    std::size_t draws, std::uint64_t seed, const std::vector<double>& levels,
    unsigned threads) {
  if (draws < 99) throw_invalid(kModule, "bootstrap needs at least 99 draws");
  if (fitted.size() != residuals.size()) throw_invalid(kModule, "fitted and residuals differ in length");
  const Vector scale = residuals.cwiseAbs();
  std::vector<double> stats(draws);
  parallel_for(draws, threads, [&](std::size_t b) {
    Rng rng = make_rng(derive_seed(seed, b));
    Vector y_star(fitted.size());
    for (Eigen::Index t = 0; t < y_star.size(); ++t) {
      const double sign = (rng() >> 63) != 0 ? 1.0 : -1.0;
      y_star[t] = fitted[t] + scale[t] * sign;
    }
    stats[b] = statistic(y_star);
  });
  std::sort(stats.begin(), stats.end());
  std::map<double, double> crit;
  for (double a : levels) {
    if (!(a > 0.0 && a < 1.0)) throw_invalid(kModule, "nominal levels must lie in (0, 1)");
    crit[a] = empirical_quantile(stats, 1.0 - a);
  }
  return crit;
}

std::map<double, double> wild_bootstrap_critvals(
    const StatisticFn& statistic, const Sample& sample, const QrFit& fit,
    std::size_t draws, std::uint64_t seed, const std::vector<double>& levels,
    unsigned threads) {
  return wild_bootstrap_critvals(statistic, fit.fitted(sample.design()), fit.residuals,
                                 draws, seed, levels, threads);
}

}  // namespace qbreak
