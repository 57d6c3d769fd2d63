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

#include "qbreak/analysis.hpp"

#include <utility>

#include "qbreak/error.hpp"
#include "qbreak/serialize.hpp"

namespace qbreak {
namespace {

nlohmann::json error_json(const Error& e) {
  return {{"error", e.what()}, {"error_kind", to_string(e.kind())}, {"module", e.module()}};
}

nlohmann::json wald_block(const IvxFit& fit, const Matrix& x, const Matrix& z) {
  const auto p = static_cast<Eigen::Index>(fit.beta.size());
  try {
    return to_json(predictability_wald(fit, x, z, Matrix::Identity(p, p), Vector::Zero(p)));
  } catch (const Error& e) {
    return error_json(e);
  }
}

}  // namespace

nlohmann::json analyze_sample(const LoadedDataset& data, const AnalysisRequest& request) {
  const Sample& sample = data.sample;
  sample.validate();
  const IvxConfig config = request.ivx ? *request.ivx : IvxConfig::defaults(sample.p());
  config.validate();
  if (config.p() != sample.p()) {
    throw_invalid("analysis", "instrument config dimension differs from the predictors");
  }
  const Matrix design = sample.design();
  const Matrix z = build_instruments(sample.x_lagged, config);

  nlohmann::json report;
  report["schema_version"] = kReportSchemaVersion;
  report["qbreak_version"] = QBREAK_VERSION_STRING;
  report["dataset"] = {{"path", request.dataset.path},
                       {"response", request.dataset.response_column},
                       {"predictors", request.dataset.predictor_columns},
                       {"lag", request.dataset.lag},
                       {"n", sample.n()},
                       {"dropped_rows", data.dropped_rows}};
  if (!data.dates.empty()) {
    report["dataset"]["first_date"] = data.dates.front();
    report["dataset"]["last_date"] = data.dates.back();
  }
  std::vector<std::string> tests;
  for (const TestKind& t : request.tests) tests.push_back(to_string(t));
  std::vector<double> levels = request.options.levels;
  report["settings"] = {{"tests", tests},
                        {"taus", request.taus},
                        {"eta", request.eta},
                        {"persistence", to_string(request.options.persistence)},
                        {"levels", levels},
                        {"bootstrap_draws", request.options.bootstrap_draws},
                        {"seed", request.options.seed},
                        {"ivx", to_json(config)}};

  nlohmann::json per_tau = nlohmann::json::array();
  for (double t : request.taus) {
    const QuantileLevel tau(t);
    nlohmann::json block;
    block["tau"] = t;
    QrFit ols = qr_fit(sample.y, design, tau);
    const SparsityEstimate f = estimate_sparsity(ols, design);
    ols.sparsity = request.options.sparsity.value_or(f.value);
    block["ols_qr"] = to_json(ols);
    block["ols_qr"]["sparsity_fallback"] = f.used_fallback;

    const Vector y_tau = sample.y.array() - ols.theta[0];
    IvxFit ivz = ivz_fit(y_tau, z, tau);
    ivz.alpha_hat = ols.theta[0];
    ivz.sparsity = ols.sparsity;
    IvxFit ivx = ivx_fit(y_tau, sample.x_lagged, z, tau);
    ivx.alpha_hat = ols.theta[0];
    ivx.sparsity = ols.sparsity;
    block["ivz_qr"] = to_json(ivz);
    block["ivx_qr"] = to_json(ivx);
    block["predictability"] = {{"ivz", wald_block(ivz, sample.x_lagged, z)},
                               {"ivx", wald_block(ivx, sample.x_lagged, z)}};

    nlohmann::json breaks = nlohmann::json::array();
    for (const TestKind& kind : request.tests) {
      try {
        const LambdaGrid grid =
            make_grid(sample.n(), request.eta, design_columns(kind.estimator, sample.p()));
        breaks.push_back(to_json(break_test(kind, sample, tau, grid, config, request.options)));
      } catch (const Error& e) {
        nlohmann::json failed = error_json(e);
        failed["kind"] = to_string(kind);
        breaks.push_back(std::move(failed));
      }
    }
    block["break_tests"] = breaks;
    per_tau.push_back(block);
  }
  report["quantiles"] = per_tau;

  if (request.quantile_set_tests) {
    nlohmann::json sets = nlohmann::json::array();
    for (const TestKind& kind : request.tests) {
      try {
        const LambdaGrid grid =
            make_grid(sample.n(), request.eta, design_columns(kind.estimator, sample.p()));
        sets.push_back(to_json(
            double_sup_test(kind, sample, request.taus, grid, config, request.options)));
      } catch (const Error& e) {
        nlohmann::json failed = error_json(e);
        failed["kind"] = to_string(kind);
        sets.push_back(std::move(failed));
      }
    }
    report["quantile_set_tests"] = sets;
  }
  return report;
}

nlohmann::json run_analysis(const AnalysisRequest& request) {
  return analyze_sample(load_csv(request.dataset), request);
}

}  // namespace qbreak
