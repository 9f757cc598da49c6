#include "growthiv/diagnostics.hpp"
#include "growthiv/estimators.hpp"
#include "growthiv/sweep.hpp"
#include "growthiv/synth.hpp"

#include <benchmark/benchmark.h>

#include <map>

using namespace growthiv;

namespace {

const GrowthData& panel_data(int n_children) {
  static std::map<int, GrowthData> cache;
  auto it = cache.find(n_children);
  if (it == cache.end()) {
    auto p = StructuralParams::defaults(Country::philippines);
    p.n_children = n_children;
    it = cache.emplace(n_children, generate_panel(p, 1).growth_data(Model::protein_split)).first;
  }
  return it->second;
}

DesignMatrices oracle_design(int n_children) {
  const auto p = StructuralParams::defaults(Country::philippines);
  return build_design(panel_data(n_children), Model::protein_split, Outcome::height, oracle_instruments(p));
}

void BM_Liml(benchmark::State& state) {
  const auto d = oracle_design(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit_liml(d));
  state.counters["rows"] = static_cast<double>(d.n());
}
BENCHMARK(BM_Liml)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Diagnose(benchmark::State& state) {
  const auto d = oracle_design(static_cast<int>(state.range(0)));
  const auto iv = fit_liml(d);
  const auto ols = fit_ols(d);
  for (auto _ : state) benchmark::DoNotOptimize(diagnose(d, iv, &ols));
}
BENCHMARK(BM_Diagnose)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_SweepSlice(benchmark::State& state) {
  const auto& data = panel_data(1000);
  auto sets = enumerate_sets(Country::philippines, Model::protein_split, Outcome::height);
  sets.resize(32);
  SweepOptions opt;
  opt.workers = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(run_sweep(data, Model::protein_split, Outcome::height, sets, opt));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sets.size()));
}
BENCHMARK(BM_SweepSlice)->Arg(1)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
