// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include "cfr/counterfactual.hpp"
#include "cfr/world.hpp"

namespace {

using namespace cfr;

const World& world() {
  static World w(WorldConfig::standard());
  return w;
}

Policy logging_policy() {
  Policy p;
  p.alpha_sigma = 0.1;
  return p;
}

void BM_CollectLog(benchmark::State& st) {
  bool serial = st.range(1) != 0;
  auto pol = logging_policy();
  for (auto _ : st) {
    auto log = collect_log(pol, world(), static_cast<std::size_t>(st.range(0)), 1, {.serial = serial});
    benchmark::DoNotOptimize(log.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_Weights(benchmark::State& st) {
  bool serial = st.range(1) != 0;
  auto pol = logging_policy();
  auto log = collect_log(pol, world(), static_cast<std::size_t>(st.range(0)), 2);
  auto cols = columns_of(log);
  auto cf = CounterfactualPolicy::shifted(pol, 1.1);
  cf.alpha = 1.05;
  for (auto _ : st) {
    auto w = weights(cols, pol, cf, ReweightPoint::ScoreLevel, {.serial = serial});
    benchmark::DoNotOptimize(w.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

}  // namespace

BENCHMARK(BM_CollectLog)->ArgNames({"n", "serial"})->Args({20000, 1})->Args({20000, 0})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Weights)
    ->ArgNames({"n", "serial"})
    ->Args({200000, 1})
    ->Args({200000, 0})
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
