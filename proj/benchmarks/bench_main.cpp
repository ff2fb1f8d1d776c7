#include <benchmark/benchmark.h>

#include "seemlab/diagnostics.hpp"

namespace {

using namespace seemlab;

Mat random_matrix(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Mat a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
  return a;
}

void BM_Eigenvalues(benchmark::State& state) {
  const Mat a = random_matrix(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(eigenvalues(a));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Eigenvalues)->RangeMultiplier(2)->Range(16, 256)->Complexity(benchmark::oNCubed);

void BM_GradientFeatures(benchmark::State& state) {
  const MLPSpec spec{{4, static_cast<std::size_t>(state.range(0)), 1}};
  const Params p = init(spec, 0);
  const Network net(spec);
  const Mat x = toy_nav_dataset(100, 0).inputs();
  for (auto _ : state) benchmark::DoNotOptimize(gradient_features(net, p.theta, x));
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_GradientFeatures)->Arg(64)->Arg(256)->Arg(1024);

void BM_TdStep(benchmark::State& state) {
  const std::size_t width = static_cast<std::size_t>(state.range(0));
  TrainConfig c;
  c.spec = MLPSpec{{4, width, width, 1}};
  c.optimizer = OptimizerKind::adam;
  c.eta = 3e-4;
  const Dataset d = toy_nav_dataset(100, 0);
  const Network net(c.spec);
  Params p = init(c.spec, 0);
  Optimizer opt(c, p.size());
  const Mat x = d.inputs();
  for (auto _ : state) {
    const TargetVector t = compute_targets(net, p.theta, d, 0.99);
    p = td_step(net, p, t, x, opt);
  }
}
BENCHMARK(BM_TdStep)->Arg(64)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
