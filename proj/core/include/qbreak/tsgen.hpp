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

// Innovation and regressor generators for the persistent quantile
// predictive regression
//
//   y_t = alpha + beta' x_{t-1} + u_t,
//   x_t = (I + C / n^gamma_x) x_{t-1} + v_t,
//
// with local-to-unity (gamma_x = 1) or mildly integrated (0 < gamma_x < 1)
// regressors, plus single-break alternatives for Monte Carlo work.

#ifndef QBREAK_TSGEN_HPP_
#define QBREAK_TSGEN_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qbreak/linalg.hpp"

namespace qbreak {

enum class PersistenceClass { kLUR, kMI };

const char* to_string(PersistenceClass cls);
PersistenceClass persistence_class_from_string(const std::string& text);

struct PersistenceSpec {
  double gamma_x = 1.0;
  Vector c;  // one coefficient per regressor, each <= 0
  PersistenceClass cls = PersistenceClass::kLUR;

  // LUR with the given coefficients (gamma_x = 1).
  static PersistenceSpec local_unit_root(Vector c);
  // MI with the given coefficients and exponent in (0, 1).
  static PersistenceSpec mildly_integrated(Vector c, double gamma_x);

  std::size_t p() const { return static_cast<std::size_t>(c.size()); }
  // Diagonal of the autoregressive matrix for sample size n.
  Vector ar_coefficients(std::size_t n) const;
  void validate() const;
};

struct InnovationSpec {
  double sigma_uu = 1.0;
  Vector rho;        // Cov(u_t, v_t)
  Matrix sigma_vv;   // Cov(v_t)
  // Optional linear-process weights phi_0, phi_1, ...; v_t = sum phi_j e_{t-j}.
  // Empty means v_t = e_t.
  std::vector<Matrix> ma_weights;

  // sigma_uu = 1, rho = rho_uv * 1, sigma_vv = I_p.
  static InnovationSpec standard(std::size_t p, double rho_uv = 0.0);

  std::size_t p() const { return static_cast<std::size_t>(rho.size()); }
  // Stacked (p+1)x(p+1) covariance of (u_t, e_t').
  Matrix covariance() const;
  void validate() const;
};

struct Innovations {
  Vector u;  // n
  Matrix v;  // n x p
};

struct Sample {
  Vector y;          // y_1..y_n
  Matrix x_lagged;   // row t-1 holds x_{t-1}; first row is x_0
  bool has_intercept = true;

  std::size_t n() const { return static_cast<std::size_t>(y.size()); }
  std::size_t p() const { return static_cast<std::size_t>(x_lagged.cols()); }
  // (1, x_{t-1}') rows when has_intercept, x_{t-1}' rows otherwise.
  Matrix design() const;
  void validate() const;
};

struct BreakScenario {
  Vector theta1;  // (alpha, beta')' for t <= kappa
  Vector theta2;  // (alpha, beta')' for t > kappa
  std::optional<double> lambda0;

  static BreakScenario null(Vector theta);
  static BreakScenario single_break(Vector theta1, Vector theta2,
                                    double lambda0);

  bool is_null() const { return !lambda0.has_value(); }
  std::size_t p() const { return static_cast<std::size_t>(theta1.size()) - 1; }
  // kappa = floor(lambda0 * n); regime 2 starts at t = kappa + 1.
  std::size_t break_index(std::size_t n) const;
  void validate() const;
};

// Draws n rows of (u_t, v_t'), deterministic in seed. Rejects a covariance
// that is not positive definite.
Innovations gen_innovations(const InnovationSpec& spec, std::size_t n,
                            std::uint64_t seed);

// x_t = Phi_n x_{t-1} + v_t for t = 1..n with x_0 given. Row t-1 of the
// result holds x_t.
Matrix gen_regressors(const PersistenceSpec& spec, const Matrix& v,
                      const Vector& x0);

// Full sample for one scenario. x0 defaults to zero.
Sample gen_sample(const BreakScenario& scenario,
                  const PersistenceSpec& persistence,
                  const InnovationSpec& innov, std::size_t n,
                  std::uint64_t seed, const std::optional<Vector>& x0 = {});

}  // namespace qbreak

#endif  // QBREAK_TSGEN_HPP_
