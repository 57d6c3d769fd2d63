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

#include "qbreak/mcharness.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <sstream>

#include <Eigen/Core>

#include "qbreak/error.hpp"
#include "qbreak/parallel.hpp"
#include "qbreak/rng.hpp"
#include "qbreak/serialize.hpp"

namespace qbreak {
namespace {

constexpr const char* kModule = "mcharness";

std::string number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct Outcome {
  bool ok = false;
  bool reject = false;
  double lambda_hat = 0.0;
  std::string reason;
};

struct DataCell {
  std::size_t n;
  double c;
  double gamma_x;
};

McReport run(const ExperimentConfig& config, const std::string& experiment) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const unsigned threads = resolve_threads(config.threads);
  const std::size_t p = config.p();

  SimulationSettings limits = config.limit_settings;
  limits.threads = threads;
  const LimitTableProvider provider = memoized_limit_provider(limits);

  std::vector<DataCell> data_cells;
  for (std::size_t n : config.n_list) {
    for (double c : config.c_list) {
      for (double g : config.gamma_x_list) data_cells.push_back({n, c, g});
    }
  }
  struct TestCell {
    double tau;
    TestKind test;
  };
  std::vector<TestCell> test_cells;
  for (double tau : config.tau_list) {
    for (const TestKind& t : config.tests) test_cells.push_back({tau, t});
  }

  // Grids per (n, test); a failure here fails the whole cell.
  std::map<std::pair<std::size_t, TestKind>, std::optional<LambdaGrid>> grids;
  std::map<std::pair<std::size_t, TestKind>, std::string> grid_errors;
  for (std::size_t n : config.n_list) {
    for (const TestKind& t : config.tests) {
      try {
        grids[{n, t}] = make_grid(n, config.eta, design_columns(t.estimator, p));
      } catch (const Error& e) {
        grids[{n, t}] = std::nullopt;
        grid_errors[{n, t}] = e.what();
      }
    }
  }

  auto declaration_for = [&](double gamma_x) {
    if (config.declared) return *config.declared;
    return gamma_x < 1.0 ? PersistenceDeclaration::kMI : PersistenceDeclaration::kLUR;
  };

  // Simulate any limit tables up front so workers only read them.
  for (const DataCell& dc : data_cells) {
    for (const TestKind& t : config.tests) {
      BreakTestOptions probe;
      if (probe.routing.route(t, declaration_for(dc.gamma_x)) != CritMethod::kSimulatedLimit) {
        continue;
      }
      LimitProcessId id;
      id.family = t.statistic == StatisticType::kSQ ? LimitFamily::kBbSupInfNorm
                                                    : LimitFamily::kBbSupNormalizedSq;
      id.p = design_columns(t.estimator, p);
      id.eta = config.eta;
      provider(id, {1.0 - config.alpha_level});
    }
  }

  const std::size_t units = data_cells.size() * config.reps;
  std::vector<std::vector<Outcome>> outcomes(units);
  const InnovationSpec innov = InnovationSpec::standard(p, config.rho_uv);

  parallel_for(units, threads, [&](std::size_t u) {
    const DataCell& dc = data_cells[u / config.reps];
    const std::size_t rep = u % config.reps;
    std::vector<Outcome>& out = outcomes[u];
    out.resize(test_cells.size());
    const std::uint64_t seed = replication_seed(config.master_seed, dc.n, dc.c, dc.gamma_x, rep);
    Sample sample;
    try {
      const Vector c = Vector::Constant(static_cast<Eigen::Index>(p), dc.c);
      const PersistenceSpec persistence =
          dc.gamma_x < 1.0 ? PersistenceSpec::mildly_integrated(c, dc.gamma_x)
                           : PersistenceSpec::local_unit_root(c);
      sample = gen_sample(config.scenario, persistence, innov, dc.n, seed);
    } catch (const Error& e) {
      for (Outcome& o : out) o.reason = e.what();
      return;
    }
    for (std::size_t i = 0; i < test_cells.size(); ++i) {
      const TestCell& tc = test_cells[i];
      const auto& grid = grids.at({dc.n, tc.test});
      if (!grid) {
        out[i].reason = grid_errors.at({dc.n, tc.test});
        continue;
      }
      BreakTestOptions options;
      options.persistence = declaration_for(dc.gamma_x);
      options.levels = {config.alpha_level};
      options.bootstrap_draws = config.bootstrap_draws;
      options.seed = derive_seed(seed, fnv1a64(to_string(tc.test) + "@" + number(tc.tau)));
      options.limit_tables = provider;
      options.threads = 1;
      try {
        const BreakTestResult r =
            break_test(tc.test, sample, QuantileLevel(tc.tau), *grid, config.ivx, options);
        out[i].ok = true;
        out[i].reject = r.reject.at(config.alpha_level);
        out[i].lambda_hat = r.lambda_hat;
      } catch (const Error& e) {
        out[i].reason = e.what();
      }
    }
  });

  McReport report;
  report.experiment = experiment;
  report.config = config;
  for (std::size_t d = 0; d < data_cells.size(); ++d) {
    const DataCell& dc = data_cells[d];
    for (std::size_t i = 0; i < test_cells.size(); ++i) {
      CellResult cell;
      std::size_t rejections = 0;
      double lambda_sum = 0.0;
      for (std::size_t rep = 0; rep < config.reps; ++rep) {
        const Outcome& o = outcomes[d * config.reps + rep][i];
        if (!o.ok) {
          ++cell.failures;
          cell.failure_reasons.push_back("rep " + std::to_string(rep) + ": " + o.reason);
          continue;
        }
        ++cell.rep_count;
        if (o.reject) ++rejections;
        lambda_sum += o.lambda_hat;
      }
      if (cell.rep_count > 0) {
        cell.rejection_rate = static_cast<double>(rejections) / static_cast<double>(cell.rep_count);
        cell.mean_lambda_hat = lambda_sum / static_cast<double>(cell.rep_count);
      }
      report.cells[CellKey{dc.n, dc.c, dc.gamma_x, test_cells[i].tau, test_cells[i].test}] =
          std::move(cell);
    }
  }
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.versions = {{"qbreak", QBREAK_VERSION_STRING},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                   std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)}};
  return report;
}

nlohmann::json cell_to_json(const CellKey& key, const CellResult& cell) {
  return {{"n", key.n},
          {"c", key.c},
          {"gamma_x", key.gamma_x},
          {"tau", key.tau},
          {"test", to_string(key.test)},
          {"rejection_rate", cell.rejection_rate},
          {"rep_count", cell.rep_count},
          {"failures", cell.failures},
          {"mean_lambda_hat", cell.mean_lambda_hat},
          {"failure_reasons", cell.failure_reasons}};
}

}  // namespace

Vector ExperimentConfig::default_theta() {
  Vector theta(4);
  theta << 1.0, 0.25, 0.75, -0.5;
  return theta;
}

void ExperimentConfig::validate() const {
  if (reps < 1) throw_invalid(kModule, "reps must be >= 1");
  if (!(alpha_level > 0.0 && alpha_level < 1.0)) {
    throw_invalid(kModule, "alpha_level must lie in (0, 1)");
  }
  if (!(eta > 0.0 && eta < 0.5)) throw_invalid(kModule, "eta must lie in (0, 0.5)");
  scenario.validate();
  ivx.validate();
  if (ivx.p() != scenario.p()) {
    throw_invalid(kModule, "instrument config and scenario disagree on p");
  }
  for (double g : gamma_x_list) {
    if (!(g > 0.0 && g <= 1.0)) throw_invalid(kModule, "gamma_x values must lie in (0, 1]");
  }
  for (double c : c_list) {
    if (c > 0.0) throw_invalid(kModule, "c values must be <= 0");
  }
  for (double t : tau_list) static_cast<void>(QuantileLevel(t));
  if (!(rho_uv > -1.0 && rho_uv < 1.0)) throw_invalid(kModule, "rho_uv must lie in (-1, 1)");
}

std::uint64_t replication_seed(std::uint64_t master_seed, std::size_t n, double c,
                               double gamma_x, std::size_t rep) {
  const std::string key = "n=" + std::to_string(n) + ";c=" + number(c) + ";gamma_x=" + number(gamma_x);
  return derive_seed(derive_seed(master_seed, fnv1a64(key)), rep);
}

McReport run_size(const ExperimentConfig& config) {
  if (!config.scenario.is_null()) {
    throw_invalid(kModule, "size experiments need a null scenario");
  }
  return run(config, "size");
}

McReport run_power(const ExperimentConfig& config) {
  if (config.scenario.is_null()) {
    throw_invalid(kModule, "power experiments need a break scenario");
  }
  return run(config, "power");
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["n_list"] = c.n_list;
  j["c_list"] = c.c_list;
  j["gamma_x_list"] = c.gamma_x_list;
  j["tau_list"] = c.tau_list;
  std::vector<std::string> tests;
  for (const TestKind& t : c.tests) tests.push_back(to_string(t));
  j["tests"] = tests;
  j["reps"] = c.reps;
  j["alpha_level"] = c.alpha_level;
  j["eta"] = c.eta;
  j["ivx"] = to_json(c.ivx);
  j["scenario"] = to_json(c.scenario);
  j["rho_uv"] = c.rho_uv;
  j["declared_persistence"] = c.declared ? nlohmann::json(to_string(*c.declared)) : nlohmann::json();
  j["bootstrap_draws"] = c.bootstrap_draws;
  j["limit_settings"] = {{"grid_steps", c.limit_settings.grid_steps},
                         {"reps", c.limit_settings.reps},
                         {"seed", c.limit_settings.seed},
                         {"levels", c.limit_settings.levels}};
  j["master_seed"] = c.master_seed;
  return j;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.n_list = j.value("n_list", c.n_list);
  c.c_list = j.value("c_list", c.c_list);
  c.gamma_x_list = j.value("gamma_x_list", c.gamma_x_list);
  c.tau_list = j.value("tau_list", c.tau_list);
  if (j.contains("tests")) {
    c.tests.clear();
    for (const auto& t : j.at("tests")) c.tests.push_back(test_kind_from_string(t.get<std::string>()));
  }
  c.reps = j.value("reps", c.reps);
  c.alpha_level = j.value("alpha_level", c.alpha_level);
  c.eta = j.value("eta", c.eta);
  if (j.contains("scenario")) c.scenario = break_scenario_from_json(j.at("scenario"));
  c.ivx = j.contains("ivx") ? ivx_config_from_json(j.at("ivx")) : IvxConfig::defaults(c.scenario.p());
  c.rho_uv = j.value("rho_uv", c.rho_uv);
  if (j.contains("declared_persistence") && !j.at("declared_persistence").is_null()) {
    c.declared = persistence_declaration_from_string(j.at("declared_persistence").get<std::string>());
  }
  c.bootstrap_draws = j.value("bootstrap_draws", c.bootstrap_draws);
  if (j.contains("limit_settings")) {
    const auto& l = j.at("limit_settings");
    c.limit_settings.grid_steps = l.value("grid_steps", c.limit_settings.grid_steps);
    c.limit_settings.reps = l.value("reps", c.limit_settings.reps);
    c.limit_settings.seed = l.value("seed", c.limit_settings.seed);
    c.limit_settings.levels = l.value("levels", c.limit_settings.levels);
  }
  c.master_seed = j.value("master_seed", c.master_seed);
  c.threads = j.value("threads", c.threads);
  c.validate();
  return c;
}

std::string emit_tables(const McReport& report, TableFormat format, bool include_wall_time) {
  if (format == TableFormat::kCsv) {
    std::ostringstream os;
    os << "n,c,gamma_x,tau,test,rejection_rate,rep_count,failures,mean_lambda_hat\n";
    for (const auto& [key, cell] : report.cells) {
      os << key.n << ',' << number(key.c) << ',' << number(key.gamma_x) << ','
         << number(key.tau) << ',' << to_string(key.test) << ','
         << number(cell.rejection_rate) << ',' << cell.rep_count << ',' << cell.failures
         << ',' << number(cell.mean_lambda_hat) << '\n';
    }
    return os.str();
  }
  nlohmann::json j;
  j["experiment"] = report.experiment;
  j["config"] = to_json(report.config);
  j["versions"] = report.versions;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& [key, cell] : report.cells) cells.push_back(cell_to_json(key, cell));
  j["cells"] = cells;
  if (include_wall_time) j["wall_time"] = report.wall_time;
  return j.dump(2) + "\n";
}

McReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw_data(kModule, std::string("report is not valid JSON: ") + e.what());
  }
  McReport r;
  r.experiment = j.value("experiment", std::string());
  r.config = experiment_config_from_json(j.at("config"));
  r.versions = j.value("versions", std::map<std::string, std::string>{});
  r.wall_time = j.value("wall_time", 0.0);
  for (const auto& cj : j.at("cells")) {
    CellKey key{cj.at("n").get<std::size_t>(), cj.at("c").get<double>(),
                cj.at("gamma_x").get<double>(), cj.at("tau").get<double>(),
                test_kind_from_string(cj.at("test").get<std::string>())};
    CellResult cell;
    cell.rejection_rate = cj.at("rejection_rate").get<double>();
    cell.rep_count = cj.at("rep_count").get<std::size_t>();
    cell.failures = cj.value("failures", std::size_t{0});
    cell.mean_lambda_hat = cj.at("mean_lambda_hat").get<double>();
    cell.failure_reasons = cj.value("failure_reasons", std::vector<std::string>{});
    r.cells[key] = std::move(cell);
  }
  return r;
}

}  // namespace qbreak
