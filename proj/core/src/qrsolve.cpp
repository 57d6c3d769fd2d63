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

#include "qbreak/qrsolve.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qbreak/distributions.hpp"
#include "qbreak/error.hpp"

namespace qbreak {
namespace {

constexpr const char* kModule = "qrsolve";
// Residuals below this (on standardized data) count as exact zeros.
constexpr double kZeroResidual = 1e-10;
constexpr double kDescentTolerance = 1e-12;

// Right derivative of rho_tau at 0 in direction b.
inline double slope_at_zero(double tau, double b) {
  return b >= 0.0 ? tau * b : (tau - 1.0) * b;
}

// Derivative of rho_tau away from its kink.
inline double loss_derivative(double tau, double r) {
  return r < 0.0 ? tau - 1.0 : tau;
}

struct Standardized {
  Matrix x;
  Vector y;
};

Standardized standardize(const Vector& y, const Matrix& design) {
  Standardized s{design, y};
  for (Eigen::Index j = 0; j < design.cols(); ++j) {
    const double scale = design.col(j).cwiseAbs().maxCoeff();
    if (!(scale > 0.0)) {
      throw_invalid(kModule, "design column " + std::to_string(j) +
                                 " is identically zero (rank deficient)");
    }
    s.x.col(j) /= scale;
  }
  const double y_scale = y.cwiseAbs().maxCoeff();
  if (y_scale > 0.0) s.y /= y_scale;
  return s;
}

// Frisch-Newton interior point on the bounded dual
//   min c'a  s.t.  X'a = (1 - tau) X'1,  0 <= a <= 1,   c = -y,
// whose equality multipliers are -theta.
Vector interior_point(const Matrix& x, const Vector& y, double tau,
                      const QrOptions& options, int* iterations) {
  const Eigen::Index n = x.rows();
  const Vector c = -y;
  const Vector b = (1.0 - tau) * x.colwise().sum().transpose();

  Vector a = Vector::Constant(n, 1.0 - tau);
  Vector s = Vector::Constant(n, tau);
  Vector dual = (x.transpose() * x).ldlt().solve(x.transpose() * c);
  Vector r = c - x * dual;
  const double shift = std::max(1e-6, 0.1 * r.cwiseAbs().mean());
  Vector z = r.cwiseMax(0.0).array() + shift;
  Vector w = (-r).cwiseMax(0.0).array() + shift;

  constexpr double kStepFraction = 0.99995;
  Vector q(n), g(n), dx(n), dz(n), dw(n), dy;
  Vector dx_aff(n), dz_aff(n), dw_aff(n);

  auto step_primal = [&](const Vector& d) {
    double step = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d[i] < 0.0) step = std::min(step, -a[i] / d[i]);
      if (d[i] > 0.0) step = std::min(step, s[i] / d[i]);
    }
    return step;
  };
  auto step_dual = [&](const Vector& dzv, const Vector& dwv) {
    double step = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (dzv[i] < 0.0) step = std::min(step, -z[i] / dzv[i]);
      if (dwv[i] < 0.0) step = std::min(step, -w[i] / dwv[i]);
    }
    return step;
  };

  int it = 0;
  for (; it < options.max_ipm_iterations; ++it) {
    const Vector rd = c - x * dual - z + w;
    const Vector rp = b - x.transpose() * a;
    const double gap = a.dot(z) + s.dot(w);
    const double scale = 1.0 + std::abs(c.dot(a));
    if (!std::isfinite(gap)) break;
    if (gap < options.gap_tolerance * scale && rp.norm() < 1e-9 * scale) break;

    q = ((z.array() / a.array()) + (w.array() / s.array())).inverse().matrix();
    Eigen::LLT<Matrix> normal(x.transpose() * q.asDiagonal() * x);
    if (normal.info() != Eigen::Success) break;

    auto solve = [&](const Vector& rxz, const Vector& rsw, Vector& ox,
                     Vector& oz, Vector& ow) {
      g = (rxz.array() / a.array() - rsw.array() / s.array()).matrix() - rd;
      dy = normal.solve(rp - x.transpose() * q.cwiseProduct(g));
      ox = q.cwiseProduct(x * dy + g);
      oz = ((rxz - z.cwiseProduct(ox)).array() / a.array()).matrix();
      ow = ((rsw + w.cwiseProduct(ox)).array() / s.array()).matrix();
    };

    // Predictor.
    solve(-a.cwiseProduct(z), -s.cwiseProduct(w), dx_aff, dz_aff, dw_aff);
    const double ap = step_primal(dx_aff);
    const double ad = step_dual(dz_aff, dw_aff);
    const double mu_aff = (a + ap * dx_aff).dot(z + ad * dz_aff) +
                          (s - ap * dx_aff).dot(w + ad * dw_aff);
    const double sigma = std::pow(mu_aff / gap, 3.0);
    const double mu = sigma * gap / static_cast<double>(n);

    // Corrector.
    const Vector rxz = (-a.cwiseProduct(z) - dx_aff.cwiseProduct(dz_aff)).array() + mu;
    const Vector rsw = (-s.cwiseProduct(w) + dx_aff.cwiseProduct(dw_aff)).array() + mu;
    solve(rxz, rsw, dx, dz, dw);
    const Vector dy_full = dy;
    const double sp = std::min(1.0, kStepFraction * step_primal(dx));
    const double sd = std::min(1.0, kStepFraction * step_dual(dz, dw));

    a += sp * dx;
    s -= sp * dx;
    dual += sd * dy_full;
    z += sd * dz;
    w += sd * dw;
    if (!a.allFinite() || !dual.allFinite()) break;
  }
  *iterations = it;
  if (!dual.allFinite()) return Vector::Zero(x.cols());
  return -dual;
}

// Greedily picks d rows with the smallest |residual| that span R^d.
std::vector<std::size_t> crossover_basis(const Matrix& x, const Vector& r) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return std::abs(r[static_cast<Eigen::Index>(i)]) <
           std::abs(r[static_cast<Eigen::Index>(j)]);
  });
  std::vector<std::size_t> basis;
  Matrix q(d, d);
  Eigen::Index k = 0;
  for (std::size_t idx : order) {
    Vector v = x.row(static_cast<Eigen::Index>(idx)).transpose();
    const double norm0 = v.norm();
    if (!(norm0 > 0.0)) continue;
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index j = 0; j < k; ++j) v -= q.col(j).dot(v) * q.col(j);
    }
    const double norm1 = v.norm();
    if (norm1 <= 1e-8 * norm0) continue;
    q.col(k++) = v / norm1;
    basis.push_back(idx);
    if (k == d) break;
  }
  if (k < d) throw_invalid(kModule, "design is rank deficient");
  return basis;
}

bool valid_basis(const Matrix& x, std::span<const std::size_t> basis) {
  const auto d = static_cast<std::size_t>(x.cols());
  if (basis.size() != d) return false;
  std::vector<std::size_t> sorted(basis.begin(), basis.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return false;
  if (sorted.back() >= static_cast<std::size_t>(x.rows())) return false;
  Matrix b(x.cols(), x.cols());
  for (std::size_t j = 0; j < d; ++j) {
    b.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(basis[j]));
  }
  Eigen::FullPivLU<Matrix> lu(b);
  lu.setThreshold(1e-10);
  return lu.isInvertible();
}

struct Breakpoint {
  double t;
  double weight;
  std::size_t index;
};

// Simplex edge descent from a basic solution. Each pivot strictly decreases
// the objective, so the walk terminates at an optimal vertex.
int simplex_polish(const Matrix& x, const Vector& y, double tau,
                   std::vector<std::size_t>& basis, int max_pivots) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Matrix b(d, d);
  Vector yb(d), r(n);
  std::vector<char> in_basis(static_cast<std::size_t>(n));
  std::vector<Breakpoint> breaks;
  breaks.reserve(static_cast<std::size_t>(n));

  for (int pivots = 0;; ++pivots) {
    std::fill(in_basis.begin(), in_basis.end(), 0);
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto row = static_cast<Eigen::Index>(basis[static_cast<std::size_t>(j)]);
      b.row(j) = x.row(row);
      yb[j] = y[row];
      in_basis[static_cast<std::size_t>(row)] = 1;
    }
    Eigen::FullPivLU<Matrix> lu(b);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) throw_numerical(kModule, "singular simplex basis");
    const Vector theta = lu.solve(yb);
    const Matrix binv = lu.inverse();
    r = y - x * theta;
    const Matrix dir = x * binv;  // column j: X delta for delta = B^{-1} e_j

    // Right derivatives along +-B^{-1} e_j.
    Vector d_plus = Vector::Zero(d), d_minus = Vector::Zero(d);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_basis[static_cast<std::size_t>(i)]) continue;
      const double ri = r[i];
      if (std::abs(ri) > kZeroResidual) {
        const double g = loss_derivative(tau, ri);
        d_plus.noalias() -= g * dir.row(i).transpose();
        d_minus.noalias() += g * dir.row(i).transpose();
      } else {
        for (Eigen::Index j = 0; j < d; ++j) {
          d_plus[j] += slope_at_zero(tau, -dir(i, j));
          d_minus[j] += slope_at_zero(tau, dir(i, j));
        }
      }
    }
    // The leaving basic observation's residual moves to -t s.
    d_plus.array() += slope_at_zero(tau, -1.0);
    d_minus.array() += slope_at_zero(tau, 1.0);

    Eigen::Index j_plus, j_minus;
    const double best_plus = d_plus.minCoeff(&j_plus);
    const double best_minus = d_minus.minCoeff(&j_minus);
    const bool use_plus = best_plus <= best_minus;
    const double slope0 = use_plus ? best_plus : best_minus;
    if (slope0 >= -kDescentTolerance) return pivots;
    if (pivots >= max_pivots) {
      throw_numerical(kModule, "simplex pivot limit reached without optimality");
    }
    const Eigen::Index leave = use_plus ? j_plus : j_minus;
    const double sign = use_plus ? 1.0 : -1.0;

    breaks.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_basis[static_cast<std::size_t>(i)]) continue;
      const double ai = sign * dir(i, leave);
      if (ai == 0.0 || std::abs(r[i]) <= kZeroResidual) continue;
      const double t = r[i] / ai;
      if (t > 0.0) breaks.push_back({t, std::abs(ai), static_cast<std::size_t>(i)});
    }
    std::sort(breaks.begin(), breaks.end(),
              [](const Breakpoint& l, const Breakpoint& rr) { return l.t < rr.t; });
    double slope = slope0;
    std::size_t enter = static_cast<std::size_t>(n);
    for (const Breakpoint& bp : breaks) {
      slope += bp.weight;
      if (slope >= 0.0) {
        enter = bp.index;
        break;
      }
    }
    if (enter == static_cast<std::size_t>(n)) {
      throw_numerical(kModule, "unbounded descent direction");
    }
    basis[static_cast<std::size_t>(leave)] = enter;
  }
}

}  // namespace

QuantileLevel::QuantileLevel(double tau) : tau_(tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw_invalid(kModule, "quantile level must lie in (0, 1), got " +
                               std::to_string(tau));
  }
}

double check_loss(QuantileLevel tau, double u) {
  return u * (tau.value() - (u < 0.0 ? 1.0 : 0.0));
}

double psi(QuantileLevel tau, double u) {
  return tau.value() - (u <= 0.0 ? 1.0 : 0.0);
}

double check_objective(const Vector& y, const Matrix& design,
                       QuantileLevel tau, const Vector& theta) {
  const Vector r = y - design * theta;
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) total += check_loss(tau, r[i]);
  return total;
}

QrFit qr_fit(const Vector& y, const Matrix& design, QuantileLevel tau,
             const QrOptions& options) {
  const Eigen::Index n = design.rows();
  const Eigen::Index d = design.cols();
  if (y.size() != n) throw_invalid(kModule, "y and design differ in length");
  if (d == 0) throw_invalid(kModule, "design has no columns");
  if (n <= d) throw_invalid(kModule, "need more observations than columns");
  if (!y.allFinite() || !design.allFinite()) {
    throw_invalid(kModule, "non-finite values in y or design");
  }

  const Standardized st = standardize(y, design);
  if (column_rank(st.x) < d) throw_invalid(kModule, "design is rank deficient");

  QrFit fit;
  fit.tau = tau;
  if (!options.warm_basis.empty() && valid_basis(st.x, options.warm_basis)) {
    fit.basis.assign(options.warm_basis.begin(), options.warm_basis.end());
  } else {
    const Vector theta0 = interior_point(st.x, st.y, tau, options, &fit.iterations);
    fit.basis = crossover_basis(st.x, st.y - st.x * theta0);
  }
  const int cap = options.max_pivots > 0 ? options.max_pivots
                                         : 20 * static_cast<int>(n) + 100;
  fit.pivots = simplex_polish(st.x, st.y, tau, fit.basis, cap);

  // Exact vertex on the original scale.
  Matrix b(d, d);
  Vector yb(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto row = static_cast<Eigen::Index>(fit.basis[static_cast<std::size_t>(j)]);
    b.row(j) = design.row(row);
    yb[j] = y[row];
  }
  fit.theta = Eigen::FullPivLU<Matrix>(b).solve(yb);
  fit.residuals = y - design * fit.theta;
  for (std::size_t idx : fit.basis) fit.residuals[static_cast<Eigen::Index>(idx)] = 0.0;
  fit.psi_values.resize(n);
  fit.objective = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    fit.psi_values[i] = psi(tau, fit.residuals[i]);
    fit.objective += check_loss(tau, fit.residuals[i]);
  }
  return fit;
}

Vector subgradient_partial_sum(const Vector& psi_values, const Matrix& weights,
                               std::size_t kappa) {
  const auto k = static_cast<Eigen::Index>(kappa);
  if (k > weights.rows() || psi_values.size() != weights.rows()) {
    throw_invalid(kModule, "partial sum index out of range");
  }
  return weights.topRows(k).transpose() * psi_values.head(k);
}

Vector subgradient_process(const QrFit& fit, const Matrix& design,
                           double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw_invalid(kModule, "break fraction must lie in (0, 1]");
  }
  const auto n = static_cast<double>(design.rows());
  const auto kappa = static_cast<std::size_t>(std::floor(lambda * n + 1e-9));
  return subgradient_partial_sum(fit.psi_values, design, kappa);
}

double hall_sheather_bandwidth(std::size_t n, double tau, double alpha) {
  const double x0 = normal_quantile(tau);
  const double f0 = normal_pdf(x0);
  const double z = normal_quantile(1.0 - alpha / 2.0);
  return std::pow(static_cast<double>(n), -1.0 / 3.0) * std::pow(z, 2.0 / 3.0) *
         std::pow(1.5 * f0 * f0 / (2.0 * x0 * x0 + 1.0), 1.0 / 3.0);
}

double kernel_density_at_zero(const Vector& residuals) {
  const Eigen::Index n = residuals.size();
  if (n < 2) throw_invalid(kModule, "kernel density needs >= 2 residuals");
  const double mean = residuals.mean();
  const double sd = std::sqrt((residuals.array() - mean).square().sum() /
                              static_cast<double>(n - 1));
  std::vector<double> sorted(residuals.data(), residuals.data() + n);
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  if (!(spread > 0.0)) spread = 1.0;
  const double bw = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  double total = 0.0;
  for (double r : sorted) total += normal_pdf(r / bw);
  return total / (static_cast<double>(n) * bw);
}

SparsityEstimate estimate_sparsity(const QrFit& fit, const Matrix& design) {
  const Eigen::Index n = design.rows();
  if (fit.residuals.size() != n || fit.theta.size() != design.cols()) {
    throw_invalid(kModule, "fit does not match design");
  }
  const double tau = fit.tau.value();
  SparsityEstimate est;
  double h = hall_sheather_bandwidth(static_cast<std::size_t>(n), tau);
  h = std::min(h, 0.999 * std::min(tau, 1.0 - tau));
  est.bandwidth = h;
  if (n <= 2 * design.cols() + 2) {
    throw_invalid(kModule, "too few observations for sparsity estimation");
  }

  const Vector y = design * fit.theta + fit.residuals;
  QrOptions warm;
  warm.warm_basis = fit.basis;
  const QrFit hi = qr_fit(y, design, QuantileLevel(tau + h), warm);
  const QrFit lo = qr_fit(y, design, QuantileLevel(tau - h), warm);
  const Vector xbar = design.colwise().mean().transpose();
  const double spread = xbar.dot(hi.theta - lo.theta);
  if (spread > 0.0 && std::isfinite(spread)) {
    est.value = std::max(2.0 * h / spread, 1e-6);
    return est;
  }
  est.used_fallback = true;
  est.value = std::max(kernel_density_at_zero(fit.residuals), 1e-6);
  return est;
}

}  // namespace qbreak
