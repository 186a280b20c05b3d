#include <benchmark/benchmark.h>

#include <algorithm>

#include "mctm/likelihood.hpp"
#include "mctm/simulate.hpp"

namespace {

using namespace mctm;

struct Setup {
  ObservationTable data;
  JointModel model;
  PreparedData prepared;

  Setup(std::size_t n, LambdaMode mode)
      : data(truncate(synth_birds(20210617, 15, 0.067), n)),
        model(synth_birds_truth(15, mode)),
        prepared(model.spec(), data) {}

  static ObservationTable truncate(const ObservationTable& t, std::size_t n) {
    std::vector<Observation> rows(t.rows().begin(), t.rows().begin() + static_cast<std::ptrdiff_t>(std::min(n, t.size())));
    return {t.species(), rows};
  }
};

// Arguments: rows, likelihood kind, with gradient.
void BM_Loglik(benchmark::State& state) {
  const Setup s(static_cast<std::size_t>(state.range(0)), LambdaMode::CovariateDependent);
  const auto kind = static_cast<LikelihoodKind>(state.range(1));
  const LikelihoodOptions opts{.with_gradient = state.range(2) != 0, .threads = 1};
  for (auto _ : state) benchmark::DoNotOptimize(loglik(s.model, s.prepared, kind, opts).value);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.data.size()));
}
BENCHMARK(BM_Loglik)
    ->ArgsProduct({{500, 4955},
                   {static_cast<int>(LikelihoodKind::ContinuousApprox), static_cast<int>(LikelihoodKind::DiscreteApprox)},
                   {0, 1}})
    ->Unit(benchmark::kMillisecond);

void BM_LoglikExact(benchmark::State& state) {
  const Setup s(static_cast<std::size_t>(state.range(0)), LambdaMode::Constant);
  for (auto _ : state) benchmark::DoNotOptimize(loglik_exact(s.model, s.prepared));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.data.size()));
}
BENCHMARK(BM_LoglikExact)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace
