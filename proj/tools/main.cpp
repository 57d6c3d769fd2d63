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

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "json_config.hpp"
#include "qbreak/analysis.hpp"
#include "qbreak/breaktests.hpp"
#include "qbreak/dataset.hpp"
#include "qbreak/error.hpp"
#include "qbreak/limitsim.hpp"
#include "qbreak/mcharness.hpp"
#include "qbreak/serialize.hpp"
#include "qbreak/tsgen.hpp"

namespace {

using namespace qbreak;

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kNumericalError = 3 };

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<TestKind> parse_tests(const std::vector<std::string>& names) {
  std::vector<TestKind> out;
  for (const std::string& n : names) out.push_back(test_kind_from_string(n));
  return out;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw_data("cli", "cannot write '" + path + "'");
  os << text;
}

IvxConfig make_ivx(const std::vector<double>& c_z, double gamma_z, std::size_t p) {
  IvxConfig config = IvxConfig::defaults(p);
  if (c_z.size() == 1) config.c_z = Vector::Constant(static_cast<Eigen::Index>(p), c_z.front());
  if (c_z.size() > 1) config.c_z = to_vector(c_z);
  config.gamma_z = gamma_z;
  config.validate();
  return config;
}

Vector persistence_vector(const std::vector<double>& c, std::size_t p) {
  if (c.size() == 1) return Vector::Constant(static_cast<Eigen::Index>(p), c.front());
  if (c.size() != p) throw_invalid("cli", "--c needs one value or one per predictor");
  return to_vector(c);
}

BreakScenario make_scenario(const std::vector<double>& theta,
                            const std::vector<double>& break_theta, double lambda0) {
  if (break_theta.empty()) return BreakScenario::null(to_vector(theta));
  return BreakScenario::single_break(to_vector(theta), to_vector(break_theta), lambda0);
}

struct AnalyzeArgs {
  std::string data;
  std::string response = "y";
  std::vector<std::string> predictors;
  std::size_t lag = 1;
  std::string date_column;
  std::vector<std::string> tests{"SW-IVZ", "SQ-IVZ"};
  std::vector<double> taus{0.25, 0.5, 0.75};
  double eta = 0.15;
  std::string persistence = "auto";
  std::vector<double> levels{0.10, 0.05, 0.01};
  std::size_t bootstrap_draws = 199;
  std::uint64_t seed = 7;
  std::vector<double> c_z{-1.0};
  double gamma_z = 0.95;
  bool quantile_set = false;
  unsigned threads = 1;
  std::string output;
  std::string paths_csv;
};

// Per-test failures are embedded in the report; the exit code reflects the
// most severe one.
int embedded_error_code(const nlohmann::json& report) {
  int code = kOk;
  auto visit = [&code](const nlohmann::json& node, const std::string& where) {
    if (!node.is_object() || !node.contains("error_kind")) return;
    std::cerr << "error: " << where << ": " << node.at("error").get<std::string>() << '\n';
    const std::string kind = node.at("error_kind").get<std::string>();
    const int c = kind == "numerical" ? kNumericalError : kind == "data" ? kDataError : kUsage;
    code = std::max(code, c);
  };
  for (const auto& block : report.at("quantiles")) {
    const std::string tau = "tau " + block.at("tau").dump();
    for (const auto& bt : block.at("break_tests")) {
      visit(bt, tau + " " + bt.value("kind", std::string("test")));
    }
    if (block.contains("predictability")) {
      for (const auto& [name, node] : block.at("predictability").items()) {
        visit(node, tau + " predictability " + name);
      }
    }
  }
  if (report.contains("quantile_set_tests")) {
    for (const auto& set : report.at("quantile_set_tests")) {
      visit(set, "quantile set " + set.value("kind", std::string("test")));
    }
  }
  return code;
}

int run_analyze(const AnalyzeArgs& a) {
  AnalysisRequest req;
  req.dataset.path = a.data;
  req.dataset.response_column = a.response;
  req.dataset.predictor_columns = a.predictors;
  req.dataset.lag = a.lag;
  if (!a.date_column.empty()) req.dataset.date_column = a.date_column;
  req.tests = parse_tests(a.tests);
  req.taus = a.taus;
  req.eta = a.eta;
  req.ivx = make_ivx(a.c_z, a.gamma_z, a.predictors.size());
  req.options.persistence = persistence_declaration_from_string(a.persistence);
  req.options.levels = a.levels;
  req.options.bootstrap_draws = a.bootstrap_draws;
  req.options.seed = a.seed;
  req.options.threads = a.threads;
  req.quantile_set_tests = a.quantile_set;
  for (double t : a.taus) static_cast<void>(QuantileLevel(t));

  const nlohmann::json report = run_analysis(req);
  write_output(a.output, report.dump(2) + "\n");
  if (!a.paths_csv.empty()) {
    std::ostringstream os;
    os << "tau,test,lambda,value\n";
    for (const auto& block : report.at("quantiles")) {
      for (const auto& bt : block.at("break_tests")) {
        if (!bt.contains("path")) continue;
        const auto& lam = bt.at("path").at("lambda");
        const auto& val = bt.at("path").at("value");
        for (std::size_t i = 0; i < lam.size(); ++i) {
          os << block.at("tau").dump() << ',' << bt.at("kind").get<std::string>() << ','
             << lam[i].dump() << ',' << val[i].dump() << '\n';
        }
      }
    }
    write_output(a.paths_csv, os.str());
  }
  return embedded_error_code(report);
}

struct SimulateArgs {
  std::string experiment = "auto";
  std::vector<std::size_t> n_list{250, 500, 750, 1000};
  std::vector<double> c_list{-1.0, -2.0, -5.0};
  std::vector<double> gamma_x_list{0.75, 1.0};
  std::vector<double> taus{0.25, 0.5, 0.75};
  std::vector<std::string> tests{"SW-IVZ", "SQ-IVZ"};
  std::size_t reps = 1000;
  double alpha = 0.05;
  double eta = 0.15;
  std::vector<double> theta{1.0, 0.25, 0.75, -0.5};
  std::vector<double> break_theta;
  double lambda0 = 0.5;
  double rho = 0.0;
  std::string persistence = "truth";
  std::size_t bootstrap_draws = 199;
  std::size_t limit_grid = 2000;
  std::size_t limit_reps = 100000;
  std::vector<double> c_z{-1.0};
  double gamma_z = 0.95;
  std::uint64_t seed = 20240601;
  unsigned threads = 0;
  std::string format = "csv";
  std::string output;
  bool wall_time = false;
};

int run_simulate(const SimulateArgs& a) {
  ExperimentConfig c;
  c.n_list = a.n_list;
  c.c_list = a.c_list;
  c.gamma_x_list = a.gamma_x_list;
  c.tau_list = a.taus;
  c.tests = parse_tests(a.tests);
  c.reps = a.reps;
  c.alpha_level = a.alpha;
  c.eta = a.eta;
  c.scenario = make_scenario(a.theta, a.break_theta, a.lambda0);
  c.ivx = make_ivx(a.c_z, a.gamma_z, c.scenario.p());
  c.rho_uv = a.rho;
  if (a.persistence != "truth") c.declared = persistence_declaration_from_string(a.persistence);
  c.bootstrap_draws = a.bootstrap_draws;
  c.limit_settings.grid_steps = a.limit_grid;
  c.limit_settings.reps = a.limit_reps;
  c.master_seed = a.seed;
  c.threads = a.threads;

  McReport report;
  if (a.experiment == "size" || (a.experiment == "auto" && c.scenario.is_null())) {
    report = run_size(c);
  } else if (a.experiment == "power" || a.experiment == "auto") {
    report = run_power(c);
  } else {
    throw_invalid("cli", "--experiment must be size, power or auto");
  }
  const TableFormat format = a.format == "json" ? TableFormat::kJson : TableFormat::kCsv;
  if (a.format != "json" && a.format != "csv") throw_invalid("cli", "--format must be csv or json");
  write_output(a.output, emit_tables(report, format, a.wall_time));
  std::size_t failures = 0;
  for (const auto& [key, cell] : report.cells) failures += cell.failures;
  if (failures > 0) std::cerr << "warning: " << failures << " replication failures recorded\n";
  return kOk;
}

struct TabulateArgs {
  std::string family = "BB_SUP_INF_NORM";
  std::size_t p = 1;
  double eta = 0.15;
  std::vector<double> c;
  std::size_t grid = 2000;
  std::size_t reps = 100000;
  std::uint64_t seed = 20240601;
  std::vector<double> levels{0.90, 0.95, 0.99};
  std::string cache_dir;
  unsigned threads = 0;
};

int run_tabulate(const TabulateArgs& a) {
  LimitProcessId id;
  id.family = limit_family_from_string(a.family);
  id.p = a.p;
  id.eta = a.eta;
  if (id.family == LimitFamily::kOuWaldLur) id.c = persistence_vector(a.c.empty() ? std::vector<double>{0.0} : a.c, a.p);
  if (id.family == LimitFamily::kChiSquare) id.eta = 0.0;
  id.validate();
  SimulationSettings s;
  s.grid_steps = a.grid;
  s.reps = a.reps;
  s.seed = a.seed;
  s.levels = a.levels;
  s.threads = a.threads;
  CritCache cache = a.cache_dir.empty() ? CritCache::from_environment() : CritCache(a.cache_dir);
  const CritCache::Lookup lookup = cache.get_or_compute(id, s);
  if (lookup.warning) std::cerr << "warning: " << *lookup.warning << '\n';
  nlohmann::json out = to_json(lookup.table);
  out["cache_file"] = lookup.file.string();
  out["cache_hit"] = lookup.hit;
  std::cout << out.dump(2) << '\n';
  return kOk;
}

struct GenArgs {
  std::size_t n = 500;
  std::vector<double> c{-1.0};
  double gamma_x = 0.75;
  double rho = 0.0;
  std::vector<double> theta{1.0, 0.25, 0.75, -0.5};
  std::vector<double> break_theta;
  double lambda0 = 0.5;
  std::uint64_t seed = 1;
  std::string format = "csv";
  std::string output;
};

int run_gen(const GenArgs& a) {
  const BreakScenario scenario = make_scenario(a.theta, a.break_theta, a.lambda0);
  const std::size_t p = scenario.p();
  const Vector c = persistence_vector(a.c, p);
  const PersistenceSpec persistence = a.gamma_x < 1.0
                                          ? PersistenceSpec::mildly_integrated(c, a.gamma_x)
                                          : PersistenceSpec::local_unit_root(c);
  const Sample sample = gen_sample(scenario, persistence, InnovationSpec::standard(p, a.rho), a.n, a.seed);
  if (a.format == "json") {
    write_output(a.output, to_json(sample).dump(2) + "\n");
  } else if (a.format == "csv") {
    std::ostringstream os;
    write_sample_csv(sample, os);
    write_output(a.output, os.str());
  } else {
    throw_invalid("cli", "--format must be csv or json");
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structural break tests for quantile predictive regressions"};
  app.set_version_flag("--version", std::string(QBREAK_VERSION_STRING));
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<qbreak::tools::JsonConfig>());
  app.set_config("--config", "", "JSON configuration file; flags given on the command line win");

  AnalyzeArgs aa;
  CLI::App* analyze = app.add_subcommand("analyze", "Fit and test a CSV time series");
  analyze->add_option("--data", aa.data, "CSV file")->required();
  analyze->add_option("--response", aa.response, "Response column")->capture_default_str();
  analyze->add_option("--predictors", aa.predictors, "Predictor columns")->delimiter(',')->required();
  analyze->add_option("--lag", aa.lag, "Predictor lag")->capture_default_str();
  analyze->add_option("--date-column", aa.date_column, "Optional date column");
  analyze->add_option("--tests", aa.tests, "Break tests, e.g. SW-IVZ,SQ-OLS")->delimiter(',')->capture_default_str();
  analyze->add_option("--taus", aa.taus, "Quantile levels")->delimiter(',')->capture_default_str();
  analyze->add_option("--eta", aa.eta, "Trimming fraction")->capture_default_str();
  analyze->add_option("--persistence", aa.persistence, "lur, mi or auto")
      ->check(CLI::IsMember({"lur", "mi", "auto"}))->capture_default_str();
  analyze->add_option("--levels", aa.levels, "Nominal test sizes")->delimiter(',')->capture_default_str();
  analyze->add_option("--bootstrap-draws", aa.bootstrap_draws, "Wild bootstrap draws")->capture_default_str();
  analyze->add_option("--seed", aa.seed, "Bootstrap seed")->capture_default_str();
  analyze->add_option("--c-z", aa.c_z, "Instrument persistence (one value or one per predictor)")->delimiter(',');
  analyze->add_option("--gamma-z", aa.gamma_z, "Instrument exponent")->capture_default_str();
  analyze->add_flag("--quantile-set", aa.quantile_set, "Also run the max-over-quantiles tests");
  analyze->add_option("--threads", aa.threads, "Worker threads (0 = all cores)")->capture_default_str();
  analyze->add_option("--output", aa.output, "Report path (default stdout)");
  analyze->add_option("--paths-csv", aa.paths_csv, "Write per-lambda statistic paths as CSV");

  SimulateArgs sa;
  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo size or power experiment");
  simulate->add_option("--experiment", sa.experiment, "size, power or auto")->capture_default_str();
  simulate->add_option("--n-list", sa.n_list, "Sample sizes")->delimiter(',')->capture_default_str();
  simulate->add_option("--c-list", sa.c_list, "Persistence coefficients")->delimiter(',')->capture_default_str();
  simulate->add_option("--gamma-x-list", sa.gamma_x_list, "Persistence exponents")->delimiter(',')->capture_default_str();
  simulate->add_option("--taus", sa.taus, "Quantile levels")->delimiter(',')->capture_default_str();
  simulate->add_option("--tests", sa.tests, "Break tests")->delimiter(',')->capture_default_str();
  simulate->add_option("--reps", sa.reps, "Replications per cell")->capture_default_str();
  simulate->add_option("--alpha", sa.alpha, "Nominal size")->capture_default_str();
  simulate->add_option("--eta", sa.eta, "Trimming fraction")->capture_default_str();
  simulate->add_option("--theta", sa.theta, "Regime-1 (alpha, beta...)")->delimiter(',')->capture_default_str();
  simulate->add_option("--break-theta", sa.break_theta, "Regime-2 (alpha, beta...)")->delimiter(',');
  simulate->add_option("--lambda0", sa.lambda0, "Break fraction")->capture_default_str();
  simulate->add_option("--rho", sa.rho, "Correlation of u with each v")->capture_default_str();
  simulate->add_option("--persistence", sa.persistence, "truth, lur, mi or auto")
      ->check(CLI::IsMember({"truth", "lur", "mi", "auto"}))->capture_default_str();
  simulate->add_option("--bootstrap-draws", sa.bootstrap_draws, "Wild bootstrap draws")->capture_default_str();
  simulate->add_option("--limit-grid", sa.limit_grid, "Limit simulation grid steps")->capture_default_str();
  simulate->add_option("--limit-reps", sa.limit_reps, "Limit simulation reps")->capture_default_str();
  simulate->add_option("--c-z", sa.c_z, "Instrument persistence")->delimiter(',');
  simulate->add_option("--gamma-z", sa.gamma_z, "Instrument exponent")->capture_default_str();
  simulate->add_option("--seed", sa.seed, "Master seed")->capture_default_str();
  simulate->add_option("--threads", sa.threads, "Worker threads (0 = all cores)")->capture_default_str();
  simulate->add_option("--format", sa.format, "csv or json")->capture_default_str();
  simulate->add_option("--output", sa.output, "Output path (default stdout)");
  simulate->add_flag("--wall-time", sa.wall_time, "Include wall time in JSON output");

  TabulateArgs ta;
  CLI::App* tabulate = app.add_subcommand("tabulate", "Simulate and cache a critical value table");
  tabulate->add_option("--family", ta.family, "BB_SUP_INF_NORM, BB_SUP_NORMALIZED_SQ, OU_WALD_LUR or CHI_SQUARE")->capture_default_str();
  tabulate->add_option("--p", ta.p, "Dimension")->capture_default_str();
  tabulate->add_option("--eta", ta.eta, "Trimming fraction")->capture_default_str();
  tabulate->add_option("--c", ta.c, "OU persistence (one value or one per dimension)")->delimiter(',');
  tabulate->add_option("--grid", ta.grid, "Grid steps")->capture_default_str();
  tabulate->add_option("--reps", ta.reps, "Replications")->capture_default_str();
  tabulate->add_option("--seed", ta.seed, "Seed")->capture_default_str();
  tabulate->add_option("--levels", ta.levels, "Quantile levels")->delimiter(',')->capture_default_str();
  tabulate->add_option("--cache-dir", ta.cache_dir, "Cache directory (default $QBREAK_CACHE_DIR or .qbreak-cache)");
  tabulate->add_option("--threads", ta.threads, "Worker threads (0 = all cores)")->capture_default_str();

  GenArgs ga;
  CLI::App* gen = app.add_subcommand("gen", "Emit a synthetic sample");
  gen->add_option("--n", ga.n, "Sample size")->capture_default_str();
  gen->add_option("--c", ga.c, "Persistence coefficients")->delimiter(',')->capture_default_str();
  gen->add_option("--gamma-x", ga.gamma_x, "Persistence exponent (1 = local unit root)")->capture_default_str();
  gen->add_option("--rho", ga.rho, "Correlation of u with each v")->capture_default_str();
  gen->add_option("--theta", ga.theta, "Regime-1 (alpha, beta...)")->delimiter(',')->capture_default_str();
  gen->add_option("--break-theta", ga.break_theta, "Regime-2 (alpha, beta...)")->delimiter(',');
  gen->add_option("--lambda0", ga.lambda0, "Break fraction")->capture_default_str();
  gen->add_option("--seed", ga.seed, "Seed")->capture_default_str();
  gen->add_option("--format", ga.format, "csv or json")->capture_default_str();
  gen->add_option("--output", ga.output, "Output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (analyze->parsed()) return run_analyze(aa);
    if (simulate->parsed()) return run_simulate(sa);
    if (tabulate->parsed()) return run_tabulate(ta);
    if (gen->parsed()) return run_gen(ga);
  } catch (const qbreak::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::kInvalidInput: return kUsage;
      case ErrorKind::kData: return kDataError;
      case ErrorKind::kNumerical: return kNumericalError;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}
