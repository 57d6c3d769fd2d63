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

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "qbreak/error.hpp"
#include "qbreak/limitsim.hpp"
#include "qbreak/rng.hpp"

namespace qbreak {
namespace {

namespace fs = std::filesystem;

SimulationSettings small() {
  SimulationSettings s;
  s.grid_steps = 1000;
  s.reps = 10000;
  return s;
}

// P(sup |BB| <= x) = 1 - 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2).
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

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("qbreak-test-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

TEST(KolmogorovOracle, KnownConstants) {
  EXPECT_NEAR(kolmogorov_quantile(0.95), 1.3581, 1e-4);
  EXPECT_NEAR(kolmogorov_quantile(0.99), 1.6276, 1e-4);
}

TEST(EmpiricalQuantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(empirical_quantile({1.0, 2.0, 3.0, 4.0}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(empirical_quantile({1.0, 2.0, 3.0, 4.0}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(empirical_quantile({1.0, 2.0, 3.0, 4.0}, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(empirical_quantile({0.0, 10.0}, 0.95), 9.5);
}

TEST(SimulationSettings, EnforcesMinimumResolution) {
  SimulationSettings s = small();
  s.grid_steps = 999;
  EXPECT_THROW(simulate_bb_sup(1, 0.0, s), Error);
  s = small();
  s.reps = 9999;
  EXPECT_THROW(simulate_andrews_sup(1, 0.15, s), Error);
}

TEST(LimitProcessId, Validation) {
  LimitProcessId id;
  id.p = 0;
  EXPECT_THROW(id.validate(), Error);
  id = LimitProcessId{LimitFamily::kBbSupNormalizedSq, 1, 0.0, {}, {}};
  EXPECT_THROW(id.validate(), Error);
  id = LimitProcessId{LimitFamily::kOuWaldLur, 2, 0.15, Vector::Constant(1, -1.0), {}};
  EXPECT_THROW(id.validate(), Error);
  EXPECT_EQ(limit_family_from_string("andrews"), LimitFamily::kBbSupNormalizedSq);
  EXPECT_STREQ(to_string(LimitFamily::kOuWaldLur), "OU_WALD_LUR");
}

TEST(BrownianBridgeTable, NearKolmogorovAtReducedResolution) {
  SimulationSettings s = small();
  s.reps = 40000;
  const CritTable t = simulate_bb_sup(1, 0.0, s);
  EXPECT_NEAR(t.quantile(0.95), kolmogorov_quantile(0.95), 0.025);
  EXPECT_NEAR(t.quantile(0.99), kolmogorov_quantile(0.99), 0.04);
  EXPECT_LT(t.quantile(0.90), t.quantile(0.95));
  EXPECT_LT(t.quantile(0.95), t.quantile(0.99));
}

TEST(BrownianBridgeTable, GridMaximumSitsBelowContinuousSupremum) {
  SimulationSettings s = small();
  s.continuous_sup = false;
  const CritTable grid = simulate_bb_sup(1, 0.0, s);
  s.continuous_sup = true;
  const CritTable cont = simulate_bb_sup(1, 0.0, s);
  for (const auto& [level, value] : grid.quantiles) {
    EXPECT_LE(value, cont.quantile(level)) << level;
  }
}

TEST(BrownianBridgeTable, IncreasesWithDimension) {
  const CritTable one = simulate_bb_sup(1, 0.15, small());
  const CritTable two = simulate_bb_sup(2, 0.15, small());
  for (const auto& [level, value] : one.quantiles) EXPECT_GT(two.quantile(level), value);
}

TEST(AndrewsTable, MonotoneInTrimmingAndDimension) {
  const CritTable narrow = simulate_andrews_sup(1, 0.15, small());
  const CritTable wide = simulate_andrews_sup(1, 0.05, small());
  const CritTable three = simulate_andrews_sup(3, 0.15, small());
  for (const auto& [level, value] : narrow.quantiles) {
    EXPECT_GE(wide.quantile(level), value);
    EXPECT_GT(three.quantile(level), value);
  }
}

TEST(Tables, DeterministicAcrossThreadCounts) {
  SimulationSettings s = small();
  s.threads = 1;
  const CritTable a = simulate_andrews_sup(2, 0.15, s);
  s.threads = 4;
  const CritTable b = simulate_andrews_sup(2, 0.15, s);
  EXPECT_EQ(a.quantiles, b.quantiles);
  s.seed += 1;
  const CritTable c = simulate_andrews_sup(2, 0.15, s);
  EXPECT_NE(a.quantiles, c.quantiles);
}

TEST(ChiSquareTable, AnalyticQuantiles) {
  const CritTable t = chisq_table(3);
  EXPECT_NEAR(t.quantile(0.95), 7.8147, 5e-5);
  EXPECT_EQ(t.id.family, LimitFamily::kChiSquare);
  EXPECT_THROW(t.quantile(0.975), Error);
}

TEST(OuPieces, CovarianceAtHalf) {
  const Matrix s = ou_wald_covariance(0.5, 0.5 * Matrix::Identity(2, 2));
  // 0.5 (0.5 I)(0.5 I)' + 0.5 (0.5 I)(0.5 I)' = 0.25 I.
  EXPECT_LT((s - 0.25 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(OuPieces, IdentityPsiLeavesOnlyRegimeTwo) {
  const Matrix s = ou_wald_covariance(0.3, Matrix::Identity(1, 1));
  EXPECT_NEAR(s(0, 0), 0.7, 1e-15);
}

TEST(OuPieces, ItoSumTelescopes) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::vector<double> path{0.4};
  double quadratic = 0.0;
  for (int k = 0; k < 500; ++k) {
    const double step = normal(rng) * 0.05;
    quadratic += step * step;
    path.push_back(path.back() + step);
  }
  const double expected = 0.5 * (path.back() * path.back() - path.front() * path.front() - quadratic);
  EXPECT_NEAR(ito_integral(path), expected, 1e-12);
}

TEST(OuTable, StronglyMeanRevertingMatchesAndrewsOrdering) {
  SimulationSettings s = small();
  const CritTable ou = simulate_ou_wald_lur(1, 0.15, Vector::Constant(1, -200.0), s);
  const CritTable andrews = simulate_andrews_sup(1, 0.15, s);
  EXPECT_EQ(ou.discarded, 0u);
  EXPECT_NEAR(ou.quantile(0.95), andrews.quantile(0.95), 0.08 * andrews.quantile(0.95));
}

TEST(CritTableJson, RoundTrip) {
  CritTable t = chisq_table(2);
  t.id = LimitProcessId{LimitFamily::kOuWaldLur, 2, 0.2, Vector::Constant(2, -3.0),
                        Matrix::Identity(2, 2)};
  t.discarded = 4;
  const CritTable back = crit_table_from_json(to_json(t));
  EXPECT_EQ(back.id.canonical(), t.id.canonical());
  EXPECT_EQ(back.quantiles, t.quantiles);
  EXPECT_EQ(back.discarded, 4u);
  EXPECT_EQ(to_json(back).dump(), to_json(t).dump());
}

TEST(CritCache, SecondCallIsHitWithoutRecomputation) {
  TempDir dir;
  CritCache cache(dir.path());
  const LimitProcessId id{LimitFamily::kBbSupNormalizedSq, 1, 0.15, {}, {}};
  const auto t0 = std::chrono::steady_clock::now();
  const auto first = cache.get_or_compute(id, small());
  const auto t1 = std::chrono::steady_clock::now();
  const auto second = cache.get_or_compute(id, small());
  const auto t2 = std::chrono::steady_clock::now();
  EXPECT_FALSE(first.hit);
  EXPECT_TRUE(second.hit);
  EXPECT_FALSE(second.warning.has_value());
  EXPECT_EQ(first.table.quantiles, second.table.quantiles);
  EXPECT_LT(t2 - t1, t1 - t0);
  EXPECT_TRUE(fs::exists(first.file));
}

TEST(CritCache, CorruptFileIsReplacedWithWarning) {
  TempDir dir;
  CritCache cache(dir.path());
  const LimitProcessId id{LimitFamily::kBbSupInfNorm, 1, 0.15, {}, {}};
  const auto path = cache.file_for(id, small());
  fs::create_directories(path.parent_path());
  std::ofstream(path) << "{ not json";
  const auto looked = cache.get_or_compute(id, small());
  EXPECT_FALSE(looked.hit);
  ASSERT_TRUE(looked.warning.has_value());
  const auto again = cache.get_or_compute(id, small());
  EXPECT_TRUE(again.hit);
  EXPECT_EQ(again.table.quantiles, looked.table.quantiles);
}

TEST(CritCache, DistinctKeysGetDistinctFiles) {
  CritCache cache("unused");
  const LimitProcessId bb{LimitFamily::kBbSupInfNorm, 2, 0.15, {}, {}};
  const LimitProcessId andrews{LimitFamily::kBbSupNormalizedSq, 2, 0.15, {}, {}};
  EXPECT_NE(cache.file_for(bb, small()), cache.file_for(andrews, small()));
  SimulationSettings other = small();
  other.seed += 1;
  EXPECT_NE(cache.file_for(bb, small()), cache.file_for(bb, other));
  SimulationSettings grid_max = small();
  grid_max.continuous_sup = false;
  EXPECT_NE(cache.file_for(bb, small()), cache.file_for(bb, grid_max));
  EXPECT_EQ(cache.file_for(bb, small()), cache.file_for(bb, small()));
}

}  // namespace
}  // namespace qbreak
