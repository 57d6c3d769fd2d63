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

#include "qbreak/limitsim.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <system_error>

#include <boost/random/normal_distribution.hpp>

#include "qbreak/distributions.hpp"
#include "qbreak/error.hpp"
#include "qbreak/parallel.hpp"
#include "qbreak/rng.hpp"

namespace qbreak {
namespace {

constexpr const char* kModule = "limitsim";

void check_settings(const SimulationSettings& s) {
  if (s.grid_steps < 1000) throw_invalid(kModule, "grid_steps must be >= 1000");
  if (s.reps < 10000) throw_invalid(kModule, "reps must be >= 10000");
  if (s.levels.empty()) throw_invalid(kModule, "no quantile levels requested");
  for (double level : s.levels) {
    if (!(level > 0.0 && level < 1.0)) {
      throw_invalid(kModule, "quantile levels must lie in (0, 1)");
    }
  }
}

// Grid nodes k/m with eta <= k/m <= 1 - eta.
std::pair<std::size_t, std::size_t> trimmed_nodes(std::size_t m, double eta) {
  const double md = static_cast<double>(m);
  auto lo = static_cast<std::size_t>(std::ceil(eta * md - 1e-9));
  auto hi = static_cast<std::size_t>(std::floor((1.0 - eta) * md + 1e-9));
  lo = std::max<std::size_t>(lo, eta > 0.0 ? 1 : 0);
  hi = std::min(hi, eta > 0.0 ? m - 1 : m);
  return {lo, hi};
}

// Runs draw(rng) for every rep with a per-rep derived seed. NaN marks a
// discarded rep.
CritTable tabulate(const LimitProcessId& id, const SimulationSettings& s,
                   const std::function<double(Rng&)>& draw) {
  std::vector<double> stats(s.reps);
  parallel_for(s.reps, s.threads, [&](std::size_t r) {
    Rng rng = make_rng(derive_seed(s.seed, r));
    stats[r] = draw(rng);
  });
  std::vector<double> kept;
  kept.reserve(stats.size());
  for (double v : stats) {
    if (!std::isnan(v)) kept.push_back(v);
  }
  CritTable table;
  table.id = id;
  table.grid_steps = s.grid_steps;
  table.reps = s.reps;
  table.seed = s.seed;
  table.discarded = stats.size() - kept.size();
  if (kept.empty()) throw_numerical(kModule, "every simulated path was discarded");
  std::sort(kept.begin(), kept.end());
  for (double level : s.levels) table.quantiles[level] = empirical_quantile(kept, level);
  return table;
}

// Brownian motion on m steps, one column per coordinate: row k is W(k/m).
void brownian_paths(Rng& rng, std::size_t m, std::size_t p, Matrix& w) {
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  const double sd = 1.0 / std::sqrt(static_cast<double>(m));
  w.resize(static_cast<Eigen::Index>(m + 1), static_cast<Eigen::Index>(p));
  w.row(0).setZero();
  for (std::size_t j = 0; j < p; ++j) {
    double acc = 0.0;
    for (std::size_t k = 1; k <= m; ++k) {
      acc += sd * normal(rng);
      w(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = acc;
    }
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

const char* to_string(LimitFamily family) {
  switch (family) {
    case LimitFamily::kBbSupInfNorm: return "BB_SUP_INF_NORM";
    case LimitFamily::kBbSupNormalizedSq: return "BB_SUP_NORMALIZED_SQ";
    case LimitFamily::kOuWaldLur: return "OU_WALD_LUR";
    case LimitFamily::kChiSquare: return "CHI_SQUARE";
  }
  return "?";
}

LimitFamily limit_family_from_string(const std::string& text) {
  for (LimitFamily f : {LimitFamily::kBbSupInfNorm, LimitFamily::kBbSupNormalizedSq,
                        LimitFamily::kOuWaldLur, LimitFamily::kChiSquare}) {
    if (text == to_string(f)) return f;
  }
  std::string lower;
  for (char ch : text) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (lower == "bb" || lower == "bb-sup") return LimitFamily::kBbSupInfNorm;
  if (lower == "andrews") return LimitFamily::kBbSupNormalizedSq;
  if (lower == "ou" || lower == "ou-wald") return LimitFamily::kOuWaldLur;
  if (lower == "chisq" || lower == "chi-square") return LimitFamily::kChiSquare;
  throw_invalid(kModule, "unknown limit family '" + text + "'");
}

void LimitProcessId::validate() const {
  if (p < 1) throw_invalid(kModule, "dimension p must be >= 1");
  switch (family) {
    case LimitFamily::kBbSupInfNorm:
      if (!(eta >= 0.0 && eta < 0.5)) throw_invalid(kModule, "eta must lie in [0, 0.5)");
      break;
    case LimitFamily::kBbSupNormalizedSq:
      if (!(eta > 0.0 && eta < 0.5)) throw_invalid(kModule, "eta must lie in (0, 0.5)");
      break;
    case LimitFamily::kOuWaldLur:
      if (!(eta > 0.0 && eta < 0.5)) throw_invalid(kModule, "eta must lie in (0, 0.5)");
      if (static_cast<std::size_t>(c.size()) != p) {
        throw_invalid(kModule, "OU family needs one c entry per dimension");
      }
      if (omega.size() != 0 &&
          (omega.rows() != static_cast<Eigen::Index>(p) || omega.cols() != omega.rows())) {
        throw_invalid(kModule, "omega must be p x p");
      }
      break;
    case LimitFamily::kChiSquare:
      break;
  }
}

std::string LimitProcessId::canonical() const {
  return to_json(*this).dump();
}

std::vector<double> default_quantile_levels() { return {0.90, 0.95, 0.99}; }

double CritTable::quantile(double level) const {
  for (const auto& [l, v] : quantiles) {
    if (std::abs(l - level) < 1e-12) return v;
  }
  throw_invalid(kModule, "level " + std::to_string(level) + " is not tabulated");
}

double empirical_quantile(std::vector<double> sorted_values, double level) {
  if (sorted_values.empty()) throw_invalid(kModule, "empty sample");
  if (!std::is_sorted(sorted_values.begin(), sorted_values.end())) {
    std::sort(sorted_values.begin(), sorted_values.end());
  }
  const double pos = level * static_cast<double>(sorted_values.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const std::size_t j = std::min(i + 1, sorted_values.size() - 1);
  return sorted_values[i] + (pos - static_cast<double>(i)) * (sorted_values[j] - sorted_values[i]);
}

CritTable simulate_bb_sup(std::size_t p, double eta, const SimulationSettings& s) {
  LimitProcessId id{LimitFamily::kBbSupInfNorm, p, eta, Vector(), Matrix()};
  id.validate();
  check_settings(s);
  const std::size_t m = s.grid_steps;
  const double dt = 1.0 / static_cast<double>(m);
  const auto [lo, hi] = trimmed_nodes(m, eta);
  return tabulate(id, s, [&, lo = lo, hi = hi](Rng& rng) {
    Matrix w;
    brownian_paths(rng, m, p, w);
    auto uniform = [&rng] {
      return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    };
    double best = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double end = w(static_cast<Eigen::Index>(m), jj);
      auto bridge = [&](std::size_t k) {
        return w(static_cast<Eigen::Index>(k), jj) - static_cast<double>(k) * dt * end;
      };
      for (std::size_t k = lo; k <= hi; ++k) {
        const double b = bridge(k);
        best = std::max(best, std::abs(b));
        if (s.continuous_sup && k < hi) {
          // Between nodes the path is a Brownian bridge from b to b_next with
          // variance dt; draw its maximum and minimum from their exact laws.
          const double b_next = bridge(k + 1);
          const double d2 = (b_next - b) * (b_next - b);
          const double up = 0.5 * (b + b_next + std::sqrt(d2 - 2.0 * dt * std::log(uniform())));
          const double down = 0.5 * (b + b_next - std::sqrt(d2 - 2.0 * dt * std::log(uniform())));
          best = std::max(best, std::max(up, -down));
        }
      }
    }
    return best;
  });
}

CritTable simulate_andrews_sup(std::size_t p, double eta, const SimulationSettings& s) {
  LimitProcessId id{LimitFamily::kBbSupNormalizedSq, p, eta, Vector(), Matrix()};
  id.validate();
  check_settings(s);
  const std::size_t m = s.grid_steps;
  const auto [lo, hi] = trimmed_nodes(m, eta);
  return tabulate(id, s, [&, lo = lo, hi = hi](Rng& rng) {
    Matrix w;
    brownian_paths(rng, m, p, w);
    const Eigen::RowVectorXd end = w.row(static_cast<Eigen::Index>(m));
    double best = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) {
      const double lam = static_cast<double>(k) / static_cast<double>(m);
      const double sq = (w.row(static_cast<Eigen::Index>(k)) - lam * end).squaredNorm();
      best = std::max(best, sq / (lam * (1.0 - lam)));
    }
    return best;
  });
}

Matrix ou_wald_covariance(double lambda, const Matrix& psi) {
  const Matrix id = Matrix::Identity(psi.rows(), psi.cols());
  const Matrix a = id - psi;
  return lambda * a * a.transpose() + (1.0 - lambda) * psi * psi.transpose();
}

double ito_integral(const std::vector<double>& path) {
  double acc = 0.0;
  for (std::size_t k = 1; k < path.size(); ++k) acc += path[k - 1] * (path[k] - path[k - 1]);
  return acc;
}

CritTable simulate_ou_wald_lur(std::size_t p, double eta, const Vector& c,
                               const SimulationSettings& s, const Matrix& omega) {
  LimitProcessId id{LimitFamily::kOuWaldLur, p, eta, c, omega};
  id.validate();
  check_settings(s);
  const Eigen::Index pp = static_cast<Eigen::Index>(p);
  const Matrix om = omega.size() == 0 ? Matrix::Identity(pp, pp) : omega;
  Eigen::LLT<Matrix> llt(om);
  if (llt.info() != Eigen::Success) throw_invalid(kModule, "omega must be positive definite");
  const Matrix chol = llt.matrixL();
  const std::size_t m = s.grid_steps;
  const double dt = 1.0 / static_cast<double>(m);
  const auto [lo, hi] = trimmed_nodes(m, eta);

  return tabulate(id, s, [&, lo = lo, hi = hi](Rng& rng) {
    const auto mm = static_cast<Eigen::Index>(m);
    Matrix b;
    brownian_paths(rng, m, p, b);
    b = b * chol.transpose();  // rows: B(k/m) with covariance omega
    Matrix w;
    brownian_paths(rng, m, p, w);

    Matrix j = Matrix::Zero(mm + 1, pp);
    for (Eigen::Index k = 1; k <= mm; ++k) {
      const Eigen::RowVectorXd db = b.row(k) - b.row(k - 1);
      j.row(k) = j.row(k - 1) + dt * j.row(k - 1).cwiseProduct(c.transpose()) + db;
    }
    Eigen::RowVectorXd mean = 0.5 * (j.row(0) + j.row(mm));
    for (Eigen::Index k = 1; k < mm; ++k) mean += j.row(k);
    mean *= dt;

    // Column k holds vec(sum_{i <= k} J^mu_{i-1} dJ_i').
    Matrix cum = Matrix::Zero(pp * pp, mm + 1);
    Matrix outer(pp, pp);
    for (Eigen::Index k = 1; k <= mm; ++k) {
      const Eigen::RowVectorXd jm = j.row(k - 1) - mean;
      const Eigen::RowVectorXd dj = j.row(k) - j.row(k - 1);
      outer.noalias() = jm.transpose() * dj;
      cum.col(k) = cum.col(k - 1) + Eigen::Map<const Vector>(outer.data(), pp * pp);
    }
    const Matrix total = om + Eigen::Map<const Matrix>(cum.col(mm).data(), pp, pp);
    Eigen::FullPivLU<Matrix> denom(total);
    denom.setThreshold(1e-13);
    if (!denom.isInvertible()) return std::nan("");
    const Matrix denom_inv = denom.inverse();
    const Vector w1 = w.row(mm).transpose();
    const Matrix id = Matrix::Identity(pp, pp);
    Matrix psi(pp, pp);
    Matrix cov(pp, pp);
    Vector delta(pp);
    double best = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const double lam = static_cast<double>(k) * dt;
      psi.noalias() = (lam * om + Eigen::Map<const Matrix>(cum.col(kk).data(), pp, pp)) * denom_inv;
      delta = w.row(kk).transpose();
      delta.noalias() -= psi * w1;
      cov.noalias() = lam * (id - psi) * (id - psi).transpose();
      cov.noalias() += (1.0 - lam) * psi * psi.transpose();
      Eigen::LDLT<Matrix> ldlt(cov);
      const Vector d = ldlt.vectorD();
      if (ldlt.info() != Eigen::Success || !(d.minCoeff() > 1e-13 * d.cwiseAbs().maxCoeff())) {
        return std::nan("");
      }
      best = std::max(best, delta.dot(ldlt.solve(delta)));
    }
    return best;
  });
}

CritTable chisq_table(std::size_t p, const std::vector<double>& levels) {
  CritTable table;
  table.id = LimitProcessId{LimitFamily::kChiSquare, p, 0.0, Vector(), Matrix()};
  table.id.validate();
  for (double level : levels) {
    table.quantiles[level] = chisq_quantile(static_cast<int>(p), level);
  }
  return table;
}

CritTable simulate_limit(const LimitProcessId& id, const SimulationSettings& s) {
  switch (id.family) {
    case LimitFamily::kBbSupInfNorm: return simulate_bb_sup(id.p, id.eta, s);
    case LimitFamily::kBbSupNormalizedSq: return simulate_andrews_sup(id.p, id.eta, s);
    case LimitFamily::kOuWaldLur: return simulate_ou_wald_lur(id.p, id.eta, id.c, s, id.omega);
    case LimitFamily::kChiSquare: return chisq_table(id.p, s.levels);
  }
  throw_invalid(kModule, "unknown family");
}

nlohmann::json to_json(const LimitProcessId& id) {
  nlohmann::json j;
  j["family"] = to_string(id.family);
  j["p"] = id.p;
  j["eta"] = id.eta;
  j["c"] = std::vector<double>(id.c.data(), id.c.data() + id.c.size());
  nlohmann::json om = nlohmann::json::array();
  for (Eigen::Index r = 0; r < id.omega.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(id.omega.cols()));
    for (Eigen::Index k = 0; k < id.omega.cols(); ++k) row[static_cast<std::size_t>(k)] = id.omega(r, k);
    om.push_back(row);
  }
  j["omega"] = om;
  return j;
}

LimitProcessId limit_id_from_json(const nlohmann::json& j) {
  LimitProcessId id;
  id.family = limit_family_from_string(j.at("family").get<std::string>());
  id.p = j.at("p").get<std::size_t>();
  id.eta = j.at("eta").get<double>();
  const auto c = j.value("c", std::vector<double>{});
  id.c = Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(c.size()));
  const auto om = j.value("omega", std::vector<std::vector<double>>{});
  id.omega.resize(static_cast<Eigen::Index>(om.size()),
                  om.empty() ? 0 : static_cast<Eigen::Index>(om.front().size()));
  for (std::size_t r = 0; r < om.size(); ++r) {
    if (static_cast<Eigen::Index>(om[r].size()) != id.omega.cols()) {
      throw_data(kModule, "ragged omega matrix");
    }
    for (std::size_t k = 0; k < om[r].size(); ++k) {
      id.omega(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = om[r][k];
    }
  }
  return id;
}

nlohmann::json to_json(const CritTable& t) {
  nlohmann::json j;
  j["id"] = to_json(t.id);
  j["grid_steps"] = t.grid_steps;
  j["reps"] = t.reps;
  j["seed"] = t.seed;
  j["discarded"] = t.discarded;
  nlohmann::json q = nlohmann::json::array();
  for (const auto& [level, value] : t.quantiles) q.push_back({{"level", level}, {"value", value}});
  j["quantiles"] = q;
  return j;
}

CritTable crit_table_from_json(const nlohmann::json& j) {
  CritTable t;
  t.id = limit_id_from_json(j.at("id"));
  t.grid_steps = j.at("grid_steps").get<std::size_t>();
  t.reps = j.at("reps").get<std::size_t>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.discarded = j.value("discarded", std::size_t{0});
  for (const auto& q : j.at("quantiles")) {
    t.quantiles[q.at("level").get<double>()] = q.at("value").get<double>();
  }
  double prev = -1.0;
  for (const auto& [level, value] : t.quantiles) {
    if (!std::isfinite(value) || value < prev) throw_data(kModule, "quantiles are not monotone");
    prev = value;
  }
  return t;
}

CritCache::CritCache(std::filesystem::path directory) : directory_(std::move(directory)) {}

CritCache CritCache::from_environment() {
  const char* dir = std::getenv("QBREAK_CACHE_DIR");
  return CritCache(dir != nullptr && *dir != '\0' ? std::filesystem::path(dir)
                                                  : std::filesystem::path(".qbreak-cache"));
}

std::filesystem::path CritCache::file_for(const LimitProcessId& id,
                                          const SimulationSettings& s) const {
  nlohmann::json key;
  key["id"] = to_json(id);
  key["grid_steps"] = s.grid_steps;
  key["reps"] = s.reps;
  key["seed"] = s.seed;
  key["levels"] = s.levels;
  if (id.family == LimitFamily::kBbSupInfNorm) key["continuous_sup"] = s.continuous_sup;
  return directory_ / ("crit-" + hex64(fnv1a64(key.dump())) + ".json");
}

CritCache::Lookup CritCache::get_or_compute(const LimitProcessId& id,
                                            const SimulationSettings& s) {
  Lookup out;
  out.file = file_for(id, s);
  if (std::filesystem::exists(out.file)) {
    try {
      std::ifstream in(out.file);
      const nlohmann::json j = nlohmann::json::parse(in);
      CritTable t = crit_table_from_json(j);
      if (t.id.canonical() != id.canonical() || t.grid_steps != s.grid_steps ||
          t.reps != s.reps || t.seed != s.seed || t.quantiles.size() != s.levels.size()) {
        throw_data(kModule, "cache entry does not match its key");
      }
      out.table = std::move(t);
      out.hit = true;
      return out;
    } catch (const std::exception& e) {
      out.warning = "cache file " + out.file.string() + " unreadable (" + e.what() +
                    "); recomputing";
    }
  }
  out.table = simulate_limit(id, s);
  std::lock_guard<std::mutex> lock(write_mutex_);
  std::error_code ec;
  std::filesystem::create_directories(directory_, ec);
  const std::filesystem::path tmp = out.file.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw_data(kModule, "cannot write cache file " + tmp.string());
    os << to_json(out.table).dump(2) << '\n';
  }
  std::filesystem::rename(tmp, out.file, ec);
  if (ec) throw_data(kModule, "cannot move cache file into place: " + ec.message());
  return out;
}

}  // namespace qbreak
