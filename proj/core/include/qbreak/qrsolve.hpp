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

// Exact linear quantile regression.
//
// qr_fit solves min_theta sum_t rho_tau(y_t - X_t' theta) with a
// Frisch-Newton (primal-dual, Mehrotra predictor-corrector) interior point
// method on the bounded dual LP, then crosses over to a basic solution and
// polishes it with simplex edge descent. The returned theta always
// interpolates exactly d observations, so objectives are exact LP optima
// rather than interior-point approximations.

#ifndef QBREAK_QRSOLVE_HPP_
#define QBREAK_QRSOLVE_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "qbreak/linalg.hpp"

namespace qbreak {

class QuantileLevel {
 public:
  // Throws Error(kInvalidInput) unless 0 < tau < 1.
  explicit QuantileLevel(double tau);

  double value() const noexcept { return tau_; }
  operator double() const noexcept { return tau_; }  // NOLINT

 private:
  double tau_;
};

// rho_tau(u) = u (tau - 1{u < 0}).
double check_loss(QuantileLevel tau, double u);
// psi_tau(u) = tau - 1{u <= 0}.
double psi(QuantileLevel tau, double u);

struct QrOptions {
  double gap_tolerance = 1e-9;   // duality gap on standardized data
  int max_ipm_iterations = 100;
  int max_pivots = 0;            // 0: 20 n + 100
  // Start the simplex polish from this basis (row indices) instead of the
  // interior point crossover. Ignored if it is not a valid nonsingular basis.
  std::span<const std::size_t> warm_basis;
};

struct QrFit {
  QuantileLevel tau{0.5};
  Vector theta;
  Vector residuals;
  Vector psi_values;
  std::optional<double> sparsity;  // f_{u(tau)}(0); see estimate_sparsity
  double objective = 0.0;
  int iterations = 0;              // interior point iterations
  int pivots = 0;                  // simplex pivots after crossover
  std::vector<std::size_t> basis;  // observations with zero residual

  Vector fitted(const Matrix& design) const { return design * theta; }
};

// Global minimizer of the check loss. Requires n > d and a full column rank
// design; throws Error(kInvalidInput) otherwise and Error(kNumerical) if the
// pivot cap is hit.
QrFit qr_fit(const Vector& y, const Matrix& design, QuantileLevel tau,
             const QrOptions& options = {});

// Objective of an arbitrary coefficient vector.
double check_objective(const Vector& y, const Matrix& design,
                       QuantileLevel tau, const Vector& theta);

// Unnormalized partial sum sum_{t <= floor(lambda n)} X_{t-1} psi(u_t).
Vector subgradient_process(const QrFit& fit, const Matrix& design,
                           double lambda);
// Same partial sum up to an explicit observation count kappa.
Vector subgradient_partial_sum(const Vector& psi_values, const Matrix& weights,
                               std::size_t kappa);

struct SparsityEstimate {
  double value = 0.0;       // estimate of f_{u(tau)}(0), clamped >= 1e-6
  double bandwidth = 0.0;   // Hall-Sheather h_n (quantile units)
  bool used_fallback = false;  // kernel density path taken on crossing
};

// Hall-Sheather bandwidth for sample size n at level tau (alpha = 0.05).
double hall_sheather_bandwidth(std::size_t n, double tau, double alpha = 0.05);

// Hendricks-Koenker difference quotient 2h / (xbar'(theta(tau+h) -
// theta(tau-h))), refitting the same regression at tau +- h. On quantile
// crossing, falls back to a Gaussian kernel density of the residuals at 0
// with Silverman's bandwidth.
SparsityEstimate estimate_sparsity(const QrFit& fit, const Matrix& design);

// Gaussian kernel density at 0 with Silverman's rule-of-thumb bandwidth.
double kernel_density_at_zero(const Vector& residuals);

}  // namespace qbreak

#endif  // QBREAK_QRSOLVE_HPP_
