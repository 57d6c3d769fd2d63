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

#include "qbreak/ivx.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "qbreak/distributions.hpp"
#include "qbreak/error.hpp"

namespace qbreak {
namespace {

constexpr const char* kModule = "ivx";

// Plain Nelder-Mead simplex search. Returns the best vertex.
template <typename F>
Vector nelder_mead(const F& objective, const Vector& start, const Vector& step,
                   int max_evals, double* best_value) {
  const Eigen::Index dim = start.size();
  std::vector<Vector> pts(static_cast<std::size_t>(dim + 1), start);
  std::vector<double> vals(static_cast<std::size_t>(dim + 1));
  for (Eigen::Index j = 0; j < dim; ++j) pts[static_cast<std::size_t>(j + 1)][j] += step[j];
  int evals = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    vals[i] = objective(pts[i]);
    ++evals;
  }
  std::vector<std::size_t> order(pts.size());
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t lo = order.front();
    const std::size_t hi = order.back();
    const std::size_t second = order[order.size() - 2];
    if (vals[lo] == 0.0) break;
    double diameter = 0.0;
    for (const Vector& p : pts) diameter = std::max(diameter, (p - pts[lo]).cwiseAbs().maxCoeff());
    if (diameter <= 1e-12 * (1.0 + pts[lo].cwiseAbs().maxCoeff())) break;

    Vector centroid = Vector::Zero(dim);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i != hi) centroid += pts[i];
    }
    centroid /= static_cast<double>(dim);
    const Vector reflected = centroid + (centroid - pts[hi]);
    const double fr = objective(reflected);
    ++evals;
    if (fr < vals[lo]) {
      const Vector expanded = centroid + 2.0 * (centroid - pts[hi]);
      const double fe = objective(expanded);
      ++evals;
      if (fe < fr) {
        pts[hi] = expanded;
        vals[hi] = fe;
      } else {
        pts[hi] = reflected;
        vals[hi] = fr;
      }
    } else if (fr < vals[second]) {
      pts[hi] = reflected;
      vals[hi] = fr;
    } else {
      const bool outside = fr < vals[hi];
      const Vector contracted = outside ? centroid + 0.5 * (reflected - centroid)
                                        : centroid + 0.5 * (pts[hi] - centroid);
      const double fc = objective(contracted);
      ++evals;
      if (fc < std::min(fr, vals[hi])) {
        pts[hi] = contracted;
        vals[hi] = fc;
      } else {
        for (std::size_t i = 0; i < pts.size(); ++i) {
          if (i == lo) continue;
          pts[i] = pts[lo] + 0.5 * (pts[i] - pts[lo]);
          vals[i] = objective(pts[i]);
          ++evals;
        }
      }
    }
  }
  const auto best = static_cast<std::size_t>(
      std::min_element(vals.begin(), vals.end()) - vals.begin());
  *best_value = vals[best];
  return pts[best];
}

double robust_spread(const Vector& v) {
  std::vector<double> s(v.data(), v.data() + v.size());
  std::sort(s.begin(), s.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(s.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const std::size_t j = std::min(i + 1, s.size() - 1);
    return s[i] + (pos - static_cast<double>(i)) * (s[j] - s[i]);
  };
  return (q(0.75) - q(0.25)) / 1.349;
}

void fill_residuals(IvxFit& fit, const Vector& y_tau, const Matrix& design) {
  fit.residuals = y_tau - design * fit.beta;
  fit.psi_values.resize(fit.residuals.size());
  for (Eigen::Index i = 0; i < fit.residuals.size(); ++i) {
    fit.psi_values[i] = psi(fit.tau, fit.residuals[i]);
  }
}

}  // namespace

IvxConfig IvxConfig::defaults(std::size_t p) {
  return IvxConfig{Vector::Constant(static_cast<Eigen::Index>(p), -1.0), 0.95, false};
}

void IvxConfig::validate() const {
  if (c_z.size() == 0) throw_invalid(kModule, "instrument config needs p >= 1");
  if (!(gamma_z > 0.0 && gamma_z < 1.0)) {
    throw_invalid(kModule, "gamma_z must lie in (0, 1)");
  }
  for (Eigen::Index i = 0; i < c_z.size(); ++i) {
    const bool ok = allow_degenerate ? c_z[i] <= 0.0 : c_z[i] < 0.0;
    if (!ok) throw_invalid(kModule, "instrument coefficients c_z must be negative");
  }
}

const char* to_string(IvxMethod method) {
  return method == IvxMethod::kIVX ? "IVX" : "IVZ";
}

Matrix build_instruments(const Matrix& x_lagged, const IvxConfig& config,
                         std::optional<std::size_t> scale_n) {
  config.validate();
  if (x_lagged.cols() != config.c_z.size()) {
    throw_invalid(kModule, "instrument config dimension differs from x");
  }
  const Eigen::Index n = x_lagged.rows();
  const double scale = std::pow(
      static_cast<double>(scale_n.value_or(static_cast<std::size_t>(n))),
      config.gamma_z);
  const Vector r = (Vector::Ones(config.c_z.size()) + config.c_z / scale).eval();
  Matrix z = Matrix::Zero(n, x_lagged.cols());
  for (Eigen::Index t = 1; t < n; ++t) {
    z.row(t) = r.cwiseProduct(z.row(t - 1).transpose()).transpose() +
               (x_lagged.row(t) - x_lagged.row(t - 1));
  }
  return z;
}

Dequantiled dequantile(const Vector& y, const Sample& sample, QuantileLevel tau) {
  if (!sample.has_intercept) {
    throw_invalid(kModule, "dequantiling needs a sample with an intercept");
  }
  Dequantiled out{Vector(), 0.0, qr_fit(y, sample.design(), tau)};
  out.alpha_hat = out.fit.theta[0];
  out.y_tau = y.array() - out.alpha_hat;
  return out;
}

double ivx_foc_norm(const Vector& y_tau, const Matrix& x_lagged,
                    const Matrix& instruments, QuantileLevel tau,
                    const Vector& beta) {
  const Vector r = y_tau - x_lagged * beta;
  Vector foc = Vector::Zero(instruments.cols());
  for (Eigen::Index t = 0; t < r.size(); ++t) {
    foc.noalias() += instruments.row(t).transpose() * psi(tau, r[t]);
  }
  return foc.norm();
}

IvxFit ivz_fit(const Vector& y_tau, const Matrix& instruments,
               QuantileLevel tau, const QrOptions& options) {
  QrFit qr = qr_fit(y_tau, instruments, tau, options);
  IvxFit fit;
  fit.tau = tau;
  fit.method = IvxMethod::kIVZ;
  fit.beta = std::move(qr.theta);
  fit.residuals = std::move(qr.residuals);
  fit.psi_values = std::move(qr.psi_values);
  fit.basis = std::move(qr.basis);
  fit.foc_norm = (instruments.transpose() * fit.psi_values).norm();
  fit.foc_tolerance = std::sqrt(static_cast<double>(instruments.cols())) *
                      instruments.cwiseAbs().maxCoeff();
  fit.converged = true;
  return fit;
}

IvxFit ivx_fit(const Vector& y_tau, const Matrix& x_lagged,
               const Matrix& instruments, QuantileLevel tau) {
  const Eigen::Index n = x_lagged.rows();
  const Eigen::Index p = x_lagged.cols();
  if (y_tau.size() != n || instruments.rows() != n || instruments.cols() != p) {
    throw_invalid(kModule, "ivx_fit dimensions do not conform");
  }
  IvxFit fit;
  fit.tau = tau;
  fit.method = IvxMethod::kIVX;
  fit.foc_tolerance = std::sqrt(static_cast<double>(p)) *
                      instruments.cwiseAbs().maxCoeff();

  for (Eigen::Index j = 0; j < p; ++j) {
    if (instruments.col(j).cwiseAbs().maxCoeff() == 0.0) {
      fit.beta = Vector::Zero(p);
      fit.converged = false;
      fit.diagnostic = "instrument column " + std::to_string(j) +
                       " is identically zero; coefficient unidentified";
      fill_residuals(fit, y_tau, x_lagged);
      fit.foc_norm = ivx_foc_norm(y_tau, x_lagged, instruments, tau, fit.beta);
      return fit;
    }
  }

  auto objective = [&](const Vector& beta) {
    const double f = ivx_foc_norm(y_tau, x_lagged, instruments, tau, beta);
    return 0.5 * f * f;
  };
  const Vector start_qr = qr_fit(y_tau, x_lagged, tau).theta;
  const double sigma = std::max(robust_spread(y_tau - x_lagged * start_qr), 1e-12);
  Vector step(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    step[j] = std::max(2.0 * sigma / x_lagged.col(j).norm(),
                       1e-8 * (1.0 + std::abs(start_qr[j])));
  }
  const int max_evals = 400 * static_cast<int>(p) + 400;

  double value = 0.0;
  Vector best = nelder_mead(objective, start_qr, step, max_evals, &value);
  double best_norm = std::sqrt(2.0 * value);
  if (best_norm > fit.foc_tolerance) {
    const Vector start_ivz = ivz_fit(y_tau, instruments, tau).beta;
    double value2 = 0.0;
    const Vector second = nelder_mead(objective, start_ivz, step, max_evals, &value2);
    if (value2 < value) {
      best = second;
      best_norm = std::sqrt(2.0 * value2);
    }
  }
  fit.beta = best;
  fit.foc_norm = best_norm;
  fill_residuals(fit, y_tau, x_lagged);
  if (fit.foc_norm > fit.foc_tolerance) {
    fit.converged = false;
    fit.diagnostic = "first-order condition norm " + std::to_string(fit.foc_norm) +
                     " exceeds tolerance " + std::to_string(fit.foc_tolerance);
  }
  return fit;
}

WaldResult predictability_wald(const IvxFit& fit, const Matrix& x_lagged,
                               const Matrix& instruments, const Matrix& r,
                               const Vector& q) {
  const Eigen::Index p = fit.beta.size();
  if (r.cols() != p || r.rows() != q.size() || r.rows() == 0) {
    throw_invalid(kModule, "restriction matrix does not conform");
  }
  if (column_rank(r.transpose()) < r.rows()) {
    throw_invalid(kModule, "restriction matrix must have full row rank");
  }
  if (!fit.sparsity || !(*fit.sparsity > 0.0)) {
    throw_invalid(kModule, "Wald statistic needs a positive sparsity estimate");
  }
  const Matrix zz = instruments.transpose() * instruments;
  Matrix moment;
  if (fit.method == IvxMethod::kIVZ) {
    moment = zz;
  } else {
    auto zz_inv = spd_inverse(zz);
    if (!zz_inv) throw_numerical(kModule, "instrument moment matrix is singular");
    const Matrix xz = x_lagged.transpose() * instruments;
    moment = xz * *zz_inv * xz.transpose();
  }
  auto moment_inv = spd_inverse(moment);
  if (!moment_inv) throw_numerical(kModule, "Wald moment matrix is singular");
  const Matrix middle = r * *moment_inv * r.transpose();
  const Vector diff = r * fit.beta - q;
  auto quad = inverse_quadratic_form(middle, diff);
  if (!quad) throw_numerical(kModule, "restricted covariance is singular");
  const double tau = fit.tau.value();
  const double f = *fit.sparsity;

  WaldResult out;
  out.df = static_cast<int>(r.rows());
  out.statistic = f * f / (tau * (1.0 - tau)) * *quad;
  out.p_value = chisq_survival(out.df, out.statistic);
  return out;
}

}  // namespace qbreak
