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

// End-to-end analysis of one dataset: full-sample quantile fits,
// predictability Wald tests and break tests per quantile, as a JSON report.
#ifndef QBREAK_ANALYSIS_HPP_
#define QBREAK_ANALYSIS_HPP_

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qbreak/breaktests.hpp"
#include "qbreak/dataset.hpp"
#include "qbreak/ivx.hpp"

namespace qbreak {

inline constexpr const char* kReportSchemaVersion = "1.0";

struct AnalysisRequest {
  DatasetSpec dataset;
  std::vector<TestKind> tests{{StatisticType::kSW, Estimator::kIVZ},
                              {StatisticType::kSQ, Estimator::kIVZ}};
  std::vector<double> taus{0.25, 0.5, 0.75};
  double eta = 0.15;
  std::optional<IvxConfig> ivx;  // unset: IvxConfig::defaults(p)
  BreakTestOptions options;
  // Adds quantile-set (double sup) versions of each selected test.
  bool quantile_set_tests = false;
};

nlohmann::json run_analysis(const AnalysisRequest& request);
// Same, for data already in memory.
nlohmann::json analyze_sample(const LoadedDataset& data, const AnalysisRequest& request);

}  // namespace qbreak

#endif  // QBREAK_ANALYSIS_HPP_
