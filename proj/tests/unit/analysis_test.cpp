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

#include <string>

#include <gtest/gtest.h>

#include "qbreak/analysis.hpp"
#include "qbreak/error.hpp"
#include "test_support.hpp"

namespace qbreak {
namespace {

AnalysisRequest fixture_request(const std::string& file) {
  AnalysisRequest req;
  req.dataset.path = std::string(QBREAK_FIXTURE_DIR) + "/" + file;
  req.dataset.response_column = "y";
  req.dataset.predictor_columns = {"x1", "x2", "x3"};
  req.taus = {0.5};
  req.options = testing::quick_options();
  req.options.persistence = PersistenceDeclaration::kMI;
  return req;
}

const nlohmann::json& find_test(const nlohmann::json& block, const std::string& kind) {
  for (const auto& t : block.at("break_tests")) {
    if (t.at("kind") == kind) return t;
  }
  throw std::runtime_error("missing " + kind);
}

bool rejects(const nlohmann::json& test, double level) {
  for (const auto& d : test.at("decision")) {
    if (d.at("level").get<double>() == level) return d.at("reject").get<bool>();
  }
  throw std::runtime_error("level not reported");
}

TEST(RunAnalysis, ReportSchema) {
  const nlohmann::json r = run_analysis(fixture_request("null_mi.csv"));
  EXPECT_EQ(r.at("schema_version"), kReportSchemaVersion);
  EXPECT_TRUE(r.contains("qbreak_version"));
  EXPECT_EQ(r.at("dataset").at("n"), 300);
  EXPECT_EQ(r.at("dataset").at("dropped_rows"), 0);
  ASSERT_EQ(r.at("quantiles").size(), 1u);
  const auto& block = r.at("quantiles")[0];
  for (const char* key : {"tau", "ols_qr", "ivz_qr", "ivx_qr", "predictability", "break_tests"}) {
    EXPECT_TRUE(block.contains(key)) << key;
  }
  EXPECT_TRUE(block.at("predictability").at("ivz").contains("p_value"));
  const auto& sw = find_test(block, "SW-IVZ");
  for (const char* key : {"statistic", "lambda_hat", "crit", "decision", "path", "crit_method"}) {
    EXPECT_TRUE(sw.contains(key)) << key;
  }
  EXPECT_EQ(sw.at("path").at("lambda").size(), sw.at("path").at("value").size());
  EXPECT_FALSE(r.contains("quantile_set_tests"));
}

TEST(RunAnalysis, NullFixtureDoesNotRejectAtOnePercent) {
  AnalysisRequest req = fixture_request("null_mi.csv");
  req.tests = {{StatisticType::kSW, Estimator::kIVZ},
               {StatisticType::kSQ, Estimator::kIVZ},
               {StatisticType::kSW, Estimator::kOLS},
               {StatisticType::kSQ, Estimator::kOLS}};
  const nlohmann::json r = run_analysis(req);
  for (const auto& t : r.at("quantiles")[0].at("break_tests")) {
    ASSERT_FALSE(t.contains("error")) << t.dump();
    EXPECT_FALSE(rejects(t, 0.01)) << t.at("kind");
  }
}

TEST(RunAnalysis, BreakFixtureLocatesBreak) {
  const nlohmann::json r = run_analysis(fixture_request("break_mi.csv"));
  const auto& sw = find_test(r.at("quantiles")[0], "SW-IVZ");
  EXPECT_TRUE(rejects(sw, 0.05));
  const double lambda_hat = sw.at("lambda_hat").get<double>();
  EXPECT_GE(lambda_hat, 0.4);
  EXPECT_LE(lambda_hat, 0.6);
}

TEST(RunAnalysis, RepeatedQuantileGivesIdenticalSections) {
  AnalysisRequest req = fixture_request("null_mi.csv");
  req.taus = {0.5, 0.5};
  const nlohmann::json r = run_analysis(req);
  ASSERT_EQ(r.at("quantiles").size(), 2u);
  EXPECT_EQ(r.at("quantiles")[0].dump(), r.at("quantiles")[1].dump());
}

TEST(RunAnalysis, QuantileSetTestsOnRequest) {
  AnalysisRequest req = fixture_request("null_mi.csv");
  req.tests = {{StatisticType::kSQ, Estimator::kIVZ}};
  req.taus = {0.25, 0.5, 0.75};
  req.quantile_set_tests = true;
  req.options.bootstrap_draws = 99;
  const nlohmann::json r = run_analysis(req);
  ASSERT_TRUE(r.contains("quantile_set_tests"));
  const auto& set = r.at("quantile_set_tests")[0];
  EXPECT_EQ(set.at("crit_method"), "WILD_BOOTSTRAP");
  EXPECT_EQ(set.at("per_tau").size(), 3u);
}

TEST(RunAnalysis, PerTestErrorsAreEmbedded) {
  AnalysisRequest req = fixture_request("null_mi.csv");
  req.options.routing.set({StatisticType::kSW, Estimator::kIVZ}, PersistenceDeclaration::kMI,
                          CritMethod::kChiSquare);
  const nlohmann::json r = run_analysis(req);
  const auto& sw = find_test(r.at("quantiles")[0], "SW-IVZ");
  ASSERT_TRUE(sw.contains("error"));
  EXPECT_NE(sw.at("error").get<std::string>().find("chi-square"), std::string::npos);
}

TEST(RunAnalysis, MissingPredictorPropagates) {
  AnalysisRequest req = fixture_request("null_mi.csv");
  req.dataset.predictor_columns = {"x1", "x9"};
  try {
    run_analysis(req);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
    EXPECT_EQ(e.module(), "dataset");
  }
}

}  // namespace
}  // namespace qbreak
