#include <benchmark/benchmark.h>

#include "mctm/estimation.hpp"
#include "mctm/simulate.hpp"

namespace {

using namespace mctm;

// Arguments: years of synthetic data, lambda mode.
void BM_Fit(benchmark::State& state) {
  const ObservationTable data = synth_birds(20210617, static_cast<int>(state.range(0)), 0.067);
  const ModelSpec spec = make_spec(data, 7, 3, static_cast<LambdaMode>(state.range(1)));
  FitOptions opts;
  opts.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(fit(data, spec, LikelihoodKind::DiscreteApprox, opts).loglik);
  state.counters["rows"] = static_cast<double>(data.size());
}
BENCHMARK(BM_Fit)
    ->ArgsProduct({{5, 15}, {static_cast<int>(LambdaMode::Constant), static_cast<int>(LambdaMode::CovariateDependent)}})
    ->Unit(benchmark::kSecond)
    ->Iterations(1);

}  // namespace
