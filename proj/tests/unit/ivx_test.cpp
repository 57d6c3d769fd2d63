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

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "qbreak/distributions.hpp"
#include "qbreak/error.hpp"
#include "qbreak/ivx.hpp"
#include "test_support.hpp"

namespace qbreak {
namespace {

using testing::persistent_sample;

// Direct evaluation of sum_{j=0}^{r-1} R^j (x_{r-j} - x_{r-j-1}) per row.
Matrix instruments_by_double_sum(const Matrix& x, const IvxConfig& config) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  Vector diag(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    diag[i] = 1.0 + config.c_z[i] / std::pow(static_cast<double>(n), config.gamma_z);
  }
  Matrix z = Matrix::Zero(n, p);
  for (Eigen::Index r = 1; r < n; ++r) {
    for (Eigen::Index i = 0; i < p; ++i) {
      double total = 0.0;
      for (Eigen::Index j = 0; j < r; ++j) {
        total += std::pow(diag[i], static_cast<double>(j)) * (x(r - j, i) - x(r - j - 1, i));
      }
      z(r, i) = total;
    }
  }
  return z;
}

TEST(IvxConfig, DefaultsAndValidation) {
  const IvxConfig c = IvxConfig::defaults(3);
  EXPECT_EQ(c.c_z, Vector::Constant(3, -1.0));
  EXPECT_DOUBLE_EQ(c.gamma_z, 0.95);
  IvxConfig bad = c;
  bad.c_z[1] = 0.0;
  EXPECT_THROW(bad.validate(), Error);
  bad.allow_degenerate = true;
  EXPECT_NO_THROW(bad.validate());
  IvxConfig exponent = c;
  exponent.gamma_z = 1.0;
  EXPECT_THROW(exponent.validate(), Error);
}

TEST(BuildInstruments, RecursionMatchesDoubleSum) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Sample s = persistent_sample(120 + 20 * seed, 2, -1.0, seed % 2 ? 1.0 : 0.75, seed);
    const IvxConfig config = IvxConfig::defaults(2);
    const Matrix rec = build_instruments(s.x_lagged, config);
    const Matrix direct = instruments_by_double_sum(s.x_lagged, config);
    const double scale = std::max(1.0, direct.cwiseAbs().maxCoeff());
    EXPECT_LT((rec - direct).cwiseAbs().maxCoeff() / scale, 1e-12) << seed;
  }
}

TEST(BuildInstruments, DegenerateConfigTelescopes) {
  const Sample s = persistent_sample(60, 2, -1.0, 1.0, 3);
  IvxConfig config = IvxConfig::defaults(2);
  config.c_z.setZero();
  config.allow_degenerate = true;
  const Matrix z = build_instruments(s.x_lagged, config);
  const Matrix expected = s.x_lagged.rowwise() - s.x_lagged.row(0);
  EXPECT_LT((z - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BuildInstruments, FirstStepIsFirstDifference) {
  const Sample s = persistent_sample(40, 3, -2.0, 0.75, 9);
  const Matrix z = build_instruments(s.x_lagged, IvxConfig::defaults(3));
  EXPECT_EQ(Vector(z.row(0).transpose()), Vector::Zero(3));
  EXPECT_LT((z.row(1) - (s.x_lagged.row(1) - s.x_lagged.row(0))).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(BuildInstruments, ScaleOverride) {
  const Sample s = persistent_sample(80, 1, -1.0, 1.0, 4);
  const IvxConfig config = IvxConfig::defaults(1);
  const Matrix part = build_instruments(s.x_lagged.topRows(40), config, 80);
  const Matrix full = build_instruments(s.x_lagged, config);
  EXPECT_LT((part - full.topRows(40)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dequantile, ConstantResponse) {
  Sample s = persistent_sample(100, 2, -1.0, 0.75, 5);
  s.y.setConstant(5.0);
  const Dequantiled d = dequantile(s.y, s, QuantileLevel(0.4));
  EXPECT_NEAR(d.alpha_hat, 5.0, 1e-10);
  EXPECT_LT(d.y_tau.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Dequantile, RequiresIntercept) {
  Sample s = persistent_sample(50, 1, -1.0, 0.75, 5);
  s.has_intercept = false;
  EXPECT_THROW(dequantile(s.y, s, QuantileLevel(0.5)), Error);
}

TEST(Dequantile, IdempotentUpToSolverScale) {
  const Sample s = persistent_sample(300, 2, -1.0, 0.75, 6);
  const Dequantiled once = dequantile(s.y, s, QuantileLevel(0.5));
  const Dequantiled twice = dequantile(once.y_tau, s, QuantileLevel(0.5));
  EXPECT_LT(std::abs(twice.alpha_hat), 1e-8);
}

TEST(IvzFit, ZeroResponseGivesZeroSlope) {
  const Sample s = persistent_sample(120, 3, -1.0, 0.75, 7);
  const Matrix z = build_instruments(s.x_lagged, IvxConfig::defaults(3));
  const IvxFit fit = ivz_fit(Vector::Zero(119), z.bottomRows(119), QuantileLevel(0.5));
  EXPECT_LT(fit.beta.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(fit.method, IvxMethod::kIVZ);
}

TEST(IvzFit, InstrumentsEqualRegressorsReproducesQuantileRegression) {
  const Sample s = persistent_sample(200, 2, -1.0, 0.75, 8, 0.0, 0.5);
  const IvxFit ivz = ivz_fit(s.y, s.x_lagged, QuantileLevel(0.35));
  const QrFit qr = qr_fit(s.y, s.x_lagged, QuantileLevel(0.35));
  EXPECT_LT((ivz.beta - qr.theta).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(IvzFit, SubgradientWithinVertexBound) {
  const Sample s = persistent_sample(250, 3, -1.0, 0.75, 10);
  const Matrix z = build_instruments(s.x_lagged, IvxConfig::defaults(3));
  const Dequantiled d = dequantile(s.y, s, QuantileLevel(0.5));
  const IvxFit fit = ivz_fit(d.y_tau, z, QuantileLevel(0.5));
  const Vector foc = z.transpose() * fit.psi_values;
  EXPECT_LE(foc.cwiseAbs().maxCoeff(), 3.0 * z.cwiseAbs().maxCoeff() + 1e-9);
}

TEST(IvxFit, MeetsFirstOrderTolerance) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Sample s = persistent_sample(300, 2, -1.0, seed % 2 ? 1.0 : 0.75, 20 + seed);
    const Matrix z = build_instruments(s.x_lagged, IvxConfig::defaults(2));
    const Dequantiled d = dequantile(s.y, s, QuantileLevel(0.5));
    const IvxFit fit = ivx_fit(d.y_tau, s.x_lagged, z, QuantileLevel(0.5));
    EXPECT_TRUE(fit.converged) << fit.diagnostic;
    EXPECT_LE(fit.foc_norm, fit.foc_tolerance);
    EXPECT_NEAR(fit.foc_norm, ivx_foc_norm(d.y_tau, s.x_lagged, z, QuantileLevel(0.5), fit.beta),
                1e-12);
  }
}

TEST(IvxFit, ScalarRootInsideScannedRootSet) {
  const Sample s = persistent_sample(200, 1, -1.0, 0.75, 31, 0.0, 0.3);
  const Matrix z = build_instruments(s.x_lagged, IvxConfig::defaults(1));
  const QuantileLevel tau(0.5);
  const IvxFit fit = ivx_fit(s.y, s.x_lagged, z, tau);
  auto foc = [&](double b) {
    double total = 0.0;
    for (Eigen::Index t = 0; t < s.y.size(); ++t) {
      total += z(t, 0) * psi(tau, s.y[t] - s.x_lagged(t, 0) * b);
    }
    return total;
  };
  // The FOC is a step function with jumps at y_t / x_t; scan a fine grid for
  // the set of points meeting the tolerance.
  double lowest = std::numeric_limits<double>::infinity();
  double highest = -lowest;
  const double step = 1e-4;
  for (double b = -1.0; b <= 1.6; b += step) {
    if (std::abs(foc(b)) <= fit.foc_tolerance) {
      lowest = std::min(lowest, b);
      highest = std::max(highest, b);
    }
  }
  ASSERT_TRUE(std::isfinite(lowest));
  EXPECT_LE(std::abs(foc(fit.beta[0])), fit.foc_tolerance);
  EXPECT_GE(fit.beta[0], lowest - step);
  EXPECT_LE(fit.beta[0], highest + step);
}

TEST(IvxFit, ZeroInstrumentColumnFlagsFailure) {
  const Sample s = persistent_sample(100, 2, -1.0, 0.75, 12);
  Matrix z = build_instruments(s.x_lagged, IvxConfig::defaults(2));
  z.col(1).setZero();
  const IvxFit fit = ivx_fit(s.y, s.x_lagged, z, QuantileLevel(0.5));
  EXPECT_FALSE(fit.converged);
  EXPECT_FALSE(fit.diagnostic.empty());
}

TEST(PredictabilityWald, ZeroAtEstimate) {
  const Sample s = persistent_sample(300, 3, -1.0, 0.75, 13);
  const Matrix z = build_instruments(s.x_lagged, IvxConfig::defaults(3));
  const Dequantiled d = dequantile(s.y, s, QuantileLevel(0.5));
  IvxFit fit = ivz_fit(d.y_tau, z, QuantileLevel(0.5));
  fit.sparsity = 0.4;
  const WaldResult w = predictability_wald(fit, s.x_lagged, z, Matrix::Identity(3, 3), fit.beta);
  EXPECT_NEAR(w.statistic, 0.0, 1e-12);
  EXPECT_EQ(w.df, 3);
  EXPECT_NEAR(w.p_value, 1.0, 1e-12);
}

TEST(PredictabilityWald, HandComputedForIvz) {
  const Sample s = persistent_sample(200, 2, -1.0, 0.75, 14);
  const Matrix z = build_instruments(s.x_lagged, IvxConfig::defaults(2));
  const Dequantiled d = dequantile(s.y, s, QuantileLevel(0.25));
  IvxFit fit = ivz_fit(d.y_tau, z, QuantileLevel(0.25));
  fit.sparsity = 0.3;
  const Matrix r = (Matrix(1, 2) << 1.0, -1.0).finished();
  const Vector q = Vector::Zero(1);
  const WaldResult w = predictability_wald(fit, s.x_lagged, z, r, q);
  const double diff = fit.beta[0] - fit.beta[1];
  const Matrix inner = r * (z.transpose() * z).inverse() * r.transpose();
  const double expected = 0.09 / (0.25 * 0.75) * diff * diff / inner(0, 0);
  EXPECT_NEAR(w.statistic, expected, 1e-9 * (1.0 + expected));
  EXPECT_NEAR(w.p_value, chisq_survival(1, expected), 1e-12);
}

TEST(PredictabilityWald, IvzSelfNormalizedUnderRescaling) {
  const Sample s = persistent_sample(300, 2, -1.0, 0.75, 15, 1.0, 0.2);
  const Matrix z = build_instruments(s.x_lagged, IvxConfig::defaults(2));
  auto stat = [&](double scale) {
    const Vector y = scale * s.y;
    Sample scaled = s;
    scaled.y = y;
    const Dequantiled d = dequantile(y, scaled, QuantileLevel(0.5));
    IvxFit fit = ivz_fit(d.y_tau, z, QuantileLevel(0.5));
    const Matrix design = scaled.design();
    fit.sparsity = estimate_sparsity(d.fit, design).value;
    return predictability_wald(fit, s.x_lagged, z, Matrix::Identity(2, 2), Vector::Zero(2))
        .statistic;
  };
  const double base = stat(1.0);
  EXPECT_NEAR(stat(4.0), base, 1e-6 * (1.0 + base));
}

TEST(PredictabilityWald, RequiresSparsity) {
  const Sample s = persistent_sample(100, 1, -1.0, 0.75, 16);
  const Matrix z = build_instruments(s.x_lagged, IvxConfig::defaults(1));
  IvxFit fit = ivz_fit(s.y, z, QuantileLevel(0.5));
  fit.sparsity.reset();
  EXPECT_THROW(predictability_wald(fit, s.x_lagged, z, Matrix::Identity(1, 1), Vector::Zero(1)),
               Error);
}

TEST(Instruments, LessPersistentThanLocalUnitRootRegressor) {
  int less = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Sample s = persistent_sample(500, 1, -1.0, 1.0, 300 + seed);
    const Matrix z = build_instruments(s.x_lagged, IvxConfig::defaults(1));
    auto lag1 = [](const Vector& v) {
      const Vector c = v.array() - v.mean();
      return c.head(c.size() - 1).dot(c.tail(c.size() - 1)) / c.squaredNorm();
    };
    if (lag1(z.col(0)) < lag1(s.x_lagged.col(0))) ++less;
  }
  EXPECT_GT(less, 50);
}

}  // namespace
}  // namespace qbreak
