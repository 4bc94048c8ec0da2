#include <benchmark/benchmark.h>

#include "sae/bym.hpp"
#include "sae/direct_estimation.hpp"
#include "sae/spatial_graph.hpp"
#include "sae/synthetic.hpp"

namespace {

sae::ScenarioConfig layout(std::size_t cols) {
  sae::ScenarioConfig c;
  c.rows = 5;
  c.cols = cols;
  c.seed = 3;
  return c;
}

void BM_EstimateAll(benchmark::State& state) {
  auto cfg = layout(9);
  cfg.sampling.clusters_per_region = static_cast<std::size_t>(state.range(0));
  const auto ds = sae::sample_survey(sae::make_truth(cfg));
  for (auto _ : state) benchmark::DoNotOptimize(sae::estimate_all(ds));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ds.records.size()));
}
BENCHMARK(BM_EstimateAll)->Arg(5)->Arg(20)->Arg(80);

void BM_BuildAdjacency(benchmark::State& state) {
  const auto regions = sae::make_grid_regions(static_cast<std::size_t>(state.range(0)),
                                              static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sae::build_adjacency(regions));
}
BENCHMARK(BM_BuildAdjacency)->Arg(5)->Arg(20)->Arg(40);

void BM_GibbsFit(benchmark::State& state) {
  const auto truth = sae::make_truth(layout(static_cast<std::size_t>(state.range(0))));
  const auto direct = sae::estimate_all(sae::sample_survey(truth));
  const auto spec = sae::BymModelSpec::build(direct, sae::build_adjacency(truth.regions));
  sae::McmcConfig mc;
  mc.chains = 2;
  mc.iterations = 2000;
  mc.burn_in = 1000;
  mc.parallel = false;
  for (auto _ : state) benchmark::DoNotOptimize(sae::gibbs_fit(spec, mc));
}
BENCHMARK(BM_GibbsFit)->Arg(9)->Arg(18)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
