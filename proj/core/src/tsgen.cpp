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

#include "qbreak/tsgen.hpp"

#include <cmath>
#include <string>

#include "qbreak/error.hpp"
#include "qbreak/rng.hpp"

namespace qbreak {
namespace {

constexpr const char* kModule = "tsgen";

}  // namespace

const char* to_string(PersistenceClass cls) {
  return cls == PersistenceClass::kLUR ? "LUR" : "MI";
}

PersistenceClass persistence_class_from_string(const std::string& text) {
  if (text == "LUR" || text == "lur") return PersistenceClass::kLUR;
  if (text == "MI" || text == "mi") return PersistenceClass::kMI;
  throw_invalid(kModule, "unknown persistence class '" + text + "'");
}

PersistenceSpec PersistenceSpec::local_unit_root(Vector c) {
  PersistenceSpec spec{1.0, std::move(c), PersistenceClass::kLUR};
  spec.validate();
  return spec;
}

PersistenceSpec PersistenceSpec::mildly_integrated(Vector c, double gamma_x) {
  PersistenceSpec spec{gamma_x, std::move(c), PersistenceClass::kMI};
  spec.validate();
  return spec;
}

Vector PersistenceSpec::ar_coefficients(std::size_t n) const {
  const double scale = std::pow(static_cast<double>(n), gamma_x);
  return (Vector::Ones(c.size()) + c / scale).eval();
}

void PersistenceSpec::validate() const {
  if (c.size() == 0) throw_invalid(kModule, "persistence needs p >= 1");
  if (!(gamma_x > 0.0 && gamma_x <= 1.0)) {
    throw_invalid(kModule, "gamma_x must lie in (0, 1]");
  }
  if ((cls == PersistenceClass::kLUR) != (gamma_x == 1.0)) {
    throw_invalid(kModule, "class LUR requires gamma_x = 1, MI requires gamma_x < 1");
  }
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (!(c[i] <= 0.0)) {
      throw_invalid(kModule, "persistence coefficients must be <= 0");
    }
  }
}

InnovationSpec InnovationSpec::standard(std::size_t p, double rho_uv) {
  const auto dim = static_cast<Eigen::Index>(p);
  InnovationSpec spec;
  spec.sigma_uu = 1.0;
  spec.rho = Vector::Constant(dim, rho_uv);
  spec.sigma_vv = Matrix::Identity(dim, dim);
  return spec;
}

Matrix InnovationSpec::covariance() const {
  const Eigen::Index dim = rho.size();
  Matrix cov(dim + 1, dim + 1);
  cov(0, 0) = sigma_uu;
  cov.block(1, 0, dim, 1) = rho;
  cov.block(0, 1, 1, dim) = rho.transpose();
  cov.block(1, 1, dim, dim) = sigma_vv;
  return cov;
}

void InnovationSpec::validate() const {
  const Eigen::Index dim = rho.size();
  if (dim == 0) throw_invalid(kModule, "innovations need p >= 1");
  if (sigma_vv.rows() != dim || sigma_vv.cols() != dim) {
    throw_invalid(kModule, "sigma_vv must be p x p");
  }
  if (!(sigma_uu > 0.0)) throw_invalid(kModule, "sigma_uu must be positive");
  Eigen::LLT<Matrix> llt(covariance());
  if (llt.info() != Eigen::Success) {
    throw_invalid(kModule, "innovation covariance is not positive definite");
  }
  for (const Matrix& phi : ma_weights) {
    if (phi.rows() != dim || phi.cols() != dim) {
      throw_invalid(kModule, "MA weights must be p x p");
    }
  }
}

Matrix Sample::design() const {
  if (!has_intercept) return x_lagged;
  Matrix d(x_lagged.rows(), x_lagged.cols() + 1);
  d.col(0).setOnes();
  d.rightCols(x_lagged.cols()) = x_lagged;
  return d;
}

void Sample::validate() const {
  if (x_lagged.rows() != y.size()) {
    throw_invalid(kModule, "x_lagged row count must equal length of y");
  }
  if (y.size() == 0) throw_invalid(kModule, "empty sample");
}

BreakScenario BreakScenario::null(Vector theta) {
  BreakScenario s{theta, theta, std::nullopt};
  s.validate();
  return s;
}

BreakScenario BreakScenario::single_break(Vector theta1, Vector theta2,
                                          double lambda0) {
  BreakScenario s{std::move(theta1), std::move(theta2), lambda0};
  s.validate();
  return s;
}

std::size_t BreakScenario::break_index(std::size_t n) const {
  if (!lambda0) return n;
  return static_cast<std::size_t>(
      std::floor(*lambda0 * static_cast<double>(n) + 1e-9));
}

void BreakScenario::validate() const {
  if (theta1.size() < 2) {
    throw_invalid(kModule, "theta must hold an intercept and >= 1 slope");
  }
  if (theta2.size() != theta1.size()) {
    throw_invalid(kModule, "regime parameter vectors differ in length");
  }
  if (lambda0) {
    if (!(*lambda0 > 0.0 && *lambda0 < 1.0)) {
      throw_invalid(kModule, "break fraction must lie in (0, 1)");
    }
  } else if (theta1 != theta2) {
    throw_invalid(kModule, "a null scenario must have theta1 == theta2");
  }
}

Innovations gen_innovations(const InnovationSpec& spec, std::size_t n,
                            std::uint64_t seed) {
  spec.validate();
  if (n == 0) throw_invalid(kModule, "n must be >= 1");
  const Eigen::Index p = spec.rho.size();
  const Matrix chol = Eigen::LLT<Matrix>(spec.covariance()).matrixL();

  const std::size_t lags = spec.ma_weights.empty() ? 0 : spec.ma_weights.size() - 1;
  const std::size_t total = n + lags;
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix e(static_cast<Eigen::Index>(total), p + 1);
  Vector z(p + 1);
  for (std::size_t t = 0; t < total; ++t) {
    for (Eigen::Index k = 0; k <= p; ++k) z[k] = normal(rng);
    e.row(static_cast<Eigen::Index>(t)) = (chol * z).transpose();
  }

  Innovations out;
  const auto rows = static_cast<Eigen::Index>(n);
  const auto offset = static_cast<Eigen::Index>(lags);
  out.u = e.col(0).tail(rows);
  if (spec.ma_weights.empty()) {
    out.v = e.rightCols(p).bottomRows(rows);
    return out;
  }
  out.v = Matrix::Zero(rows, p);
  for (Eigen::Index t = 0; t < rows; ++t) {
    for (std::size_t j = 0; j < spec.ma_weights.size(); ++j) {
      const Eigen::Index src = t + offset - static_cast<Eigen::Index>(j);
      out.v.row(t) += (spec.ma_weights[j] * e.row(src).tail(p).transpose()).transpose();
    }
  }
  return out;
}

Matrix gen_regressors(const PersistenceSpec& spec, const Matrix& v,
                      const Vector& x0) {
  spec.validate();
  if (v.cols() != spec.c.size() || x0.size() != spec.c.size()) {
    throw_invalid(kModule, "regressor dimensions do not conform");
  }
  const Vector phi = spec.ar_coefficients(static_cast<std::size_t>(v.rows()));
  Matrix x(v.rows(), v.cols());
  Vector prev = x0;
  for (Eigen::Index t = 0; t < v.rows(); ++t) {
    prev = phi.cwiseProduct(prev) + v.row(t).transpose();
    x.row(t) = prev.transpose();
  }
  return x;
}

Sample gen_sample(const BreakScenario& scenario,
                  const PersistenceSpec& persistence,
                  const InnovationSpec& innov, std::size_t n,
                  std::uint64_t seed, const std::optional<Vector>& x0) {
  scenario.validate();
  const std::size_t p = persistence.p();
  if (scenario.p() != p || innov.p() != p) {
    throw_invalid(kModule, "scenario, persistence and innovations disagree on p");
  }
  const Vector start = x0.value_or(Vector::Zero(static_cast<Eigen::Index>(p)));
  const Innovations e = gen_innovations(innov, n, seed);
  const Matrix x = gen_regressors(persistence, e.v, start);

  const auto rows = static_cast<Eigen::Index>(n);
  Sample s;
  s.has_intercept = true;
  s.x_lagged.resize(rows, static_cast<Eigen::Index>(p));
  s.x_lagged.row(0) = start.transpose();
  if (rows > 1) s.x_lagged.bottomRows(rows - 1) = x.topRows(rows - 1);

  const auto kappa = static_cast<Eigen::Index>(scenario.break_index(n));
  s.y.resize(rows);
  for (Eigen::Index t = 0; t < rows; ++t) {
    // Observation index t+1 in 1-based time; regime 1 while t+1 <= kappa.
    const Vector& theta = (t + 1 <= kappa || scenario.is_null())
                              ? scenario.theta1
                              : scenario.theta2;
    s.y[t] = theta[0] + s.x_lagged.row(t).dot(theta.tail(theta.size() - 1)) +
             e.u[t];
  }
  return s;
}

}  // namespace qbreak
