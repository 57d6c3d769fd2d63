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

// IVX instrumentation for persistent regressors and the two quantile
// estimators built on it: the IVX-QR estimator, which solves the
// instrumented first-order condition, and the IVZ-QR shortcut, which runs
// an ordinary quantile regression of the dequantiled response on the
// instruments.

#ifndef QBREAK_IVX_HPP_
#define QBREAK_IVX_HPP_

#include <cstddef>
#include <optional>
#include <string>

#include "qbreak/linalg.hpp"
#include "qbreak/qrsolve.hpp"
#include "qbreak/tsgen.hpp"

namespace qbreak {

struct IvxConfig {
  Vector c_z;            // instrument persistence, each < 0
  double gamma_z = 0.95;
  // Permits c_z = 0 (pure first-difference cumulation) for diagnostics.
  bool allow_degenerate = false;

  // C_z = -I, gamma_z = 0.95.
  static IvxConfig defaults(std::size_t p);

  std::size_t p() const { return static_cast<std::size_t>(c_z.size()); }
  void validate() const;
};

// z_t = R z_{t-1} + (x_t - x_{t-1}), z_0 = 0, R = I + diag(c_z)/scale^gamma_z.
// Row t of the result is the instrument paired with row t of x_lagged.
// scale_n defaults to the number of rows.
Matrix build_instruments(const Matrix& x_lagged, const IvxConfig& config,
                         std::optional<std::size_t> scale_n = std::nullopt);

struct Dequantiled {
  Vector y_tau;
  double alpha_hat = 0.0;
  QrFit fit;  // full-sample fit of y on (1, x_lagged)
};

// alpha_hat is the intercept of the full-sample quantile regression of y on
// (1, x_lagged); y_tau = y - alpha_hat.
Dequantiled dequantile(const Vector& y, const Sample& sample, QuantileLevel tau);

enum class IvxMethod { kIVX, kIVZ };
const char* to_string(IvxMethod method);

struct IvxFit {
  QuantileLevel tau{0.5};
  Vector beta;
  double alpha_hat = 0.0;
  Vector residuals;
  Vector psi_values;
  std::optional<double> sparsity;
  double foc_norm = 0.0;       // ||sum_t z_{t-1} psi(residual_t)||_2
  double foc_tolerance = 0.0;  // sqrt(p) * max_t ||z_{t-1}||_inf
  IvxMethod method = IvxMethod::kIVZ;
  bool converged = true;
  std::string diagnostic;
  std::vector<std::size_t> basis;  // IVZ only
};

// Quantile regression of y_tau on the instruments (no intercept).
IvxFit ivz_fit(const Vector& y_tau, const Matrix& instruments,
               QuantileLevel tau, const QrOptions& options = {});

// Instrumented first-order condition solved by Nelder-Mead on its squared
// norm, started at the no-intercept quantile regression of y_tau on x and
// restarted from the IVZ estimate if needed. converged == false (with the
// best candidate retained) when neither start meets foc_tolerance or an
// instrument column is identically zero.
IvxFit ivx_fit(const Vector& y_tau, const Matrix& x_lagged,
               const Matrix& instruments, QuantileLevel tau);

// Norm of the sample first-order condition at beta.
double ivx_foc_norm(const Vector& y_tau, const Matrix& x_lagged,
                    const Matrix& instruments, QuantileLevel tau,
                    const Vector& beta);

struct WaldResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

// Self-normalized Wald test of R beta = q:
//   f^2/(tau(1-tau)) (R b - q)' [R M^{-1} R']^{-1} (R b - q),
// with M = (X'Z)(Z'Z)^{-1}(Z'X) for IVX fits and M = Z'Z for IVZ fits.
// Requires fit.sparsity.
WaldResult predictability_wald(const IvxFit& fit, const Matrix& x_lagged,
                               const Matrix& instruments, const Matrix& r,
                               const Vector& q);

}  // namespace qbreak

#endif  // QBREAK_IVX_HPP_
