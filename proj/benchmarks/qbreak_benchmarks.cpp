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

#include <benchmark/benchmark.h>

#include "qbreak/breaktests.hpp"
#include "qbreak/limitsim.hpp"
#include "qbreak/qrsolve.hpp"
#include "qbreak/tsgen.hpp"

namespace {

using namespace qbreak;

Sample bench_sample(std::size_t n) {
  const PersistenceSpec persistence =
      PersistenceSpec::mildly_integrated(Vector::Constant(3, -1.0), 0.75);
  const Vector theta = (Vector(4) << 1.0, 0.25, 0.75, -0.5).finished();
  return gen_sample(BreakScenario::null(theta), persistence, InnovationSpec::standard(3), n, 42);
}

void BM_QrFitCold(benchmark::State& state) {
  const Sample s = bench_sample(static_cast<std::size_t>(state.range(0)));
  const Matrix x = s.design();
  for (auto _ : state) benchmark::DoNotOptimize(qr_fit(s.y, x, QuantileLevel(0.5)));
}
BENCHMARK(BM_QrFitCold)->Arg(250)->Arg(1000)->Arg(4000);

// Refit after a small perturbation, starting from the previous basis.
void BM_QrFitWarm(benchmark::State& state) {
  const Sample s = bench_sample(static_cast<std::size_t>(state.range(0)));
  const Matrix x = s.design();
  const QrFit cold = qr_fit(s.y, x, QuantileLevel(0.5));
  const Vector y = s.y.array() + 1e-3;
  QrOptions options;
  options.warm_basis = cold.basis;
  for (auto _ : state) benchmark::DoNotOptimize(qr_fit(y, x, QuantileLevel(0.5), options));
}
BENCHMARK(BM_QrFitWarm)->Arg(250)->Arg(1000)->Arg(4000);

void BM_SupWaldIvz(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Sample s = bench_sample(n);
  const LambdaGrid grid = make_grid(n, 0.15, 3);
  BreakTestOptions options;
  options.critical_values = false;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        sw_test(Estimator::kIVZ, s, QuantileLevel(0.5), grid, IvxConfig::defaults(3), options));
  }
}
BENCHMARK(BM_SupWaldIvz)->Arg(250)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_BrownianBridgeTable(benchmark::State& state) {
  SimulationSettings settings;
  settings.grid_steps = 2000;
  settings.reps = 10000;
  settings.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_bb_sup(1, 0.0, settings));
}
BENCHMARK(BM_BrownianBridgeTable)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
