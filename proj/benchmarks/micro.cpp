#include <benchmark/benchmark.h>

#include "pwrgram/datasets.hpp"
#include "pwrgram/diagram.hpp"

using namespace pwrgram;

namespace {

std::vector<Site> sites_for(std::size_t n, datasets::Distribution kind) {
  datasets::GeneratorSpec spec;
  spec.kind = kind;
  spec.n = n;
  spec.seed = 1;
  return datasets::generate(spec);
}

void BM_ClipSequence(benchmark::State& state) {
  const auto sites = sites_for(2000, datasets::Distribution::white_noise);
  const auto ctx = DiagramContext<double>::prepare(sites, {});
  const auto order = ctx.bvh.knn(ctx.sites[0].position, static_cast<std::size_t>(state.range(0)), 0);
  for (auto _ : state) {
    auto cell = ConvexCell<double>::init(ctx.sites[0], ctx.box, ctx.tolerances.plane);
    for (std::uint32_t j : order) cell.clip_bisector(ctx.sites[j]);
    benchmark::DoNotOptimize(cell.vertex_count());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ClipSequence)->Arg(16)->Arg(64)->Arg(256);

void BM_BvhBuild(benchmark::State& state) {
  const auto sites = sites_for(static_cast<std::size_t>(state.range(0)), datasets::Distribution::white_noise);
  for (auto _ : state) benchmark::DoNotOptimize(PowerBvh<double>::build(sites).nodes().size());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BvhBuild)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_BuildDiagram(benchmark::State& state) {
  const auto kind = static_cast<datasets::Distribution>(state.range(1));
  const auto sites = sites_for(static_cast<std::size_t>(state.range(0)), kind);
  BuildConfig config;
  config.thread_count = 1;
  for (auto _ : state) benchmark::DoNotOptimize(build_diagram(sites, config).neighbors.size());
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.SetLabel(datasets::to_string(kind));
}
BENCHMARK(BM_BuildDiagram)
    ->ArgsProduct({{10000, 50000}, {0, 1, 2}})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
