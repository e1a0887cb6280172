// Microbenchmarks for the hot paths: genome reconstruction, smoothing,
// discriminator inference and the closed-loop simulation.

#include <benchmark/benchmark.h>

#include <vector>

#include "roadgen/evolution.hpp"
#include "roadgen/geometry.hpp"
#include "roadgen/rng.hpp"
#include "roadgen/simulator.hpp"
#include "roadgen/transformer.hpp"

namespace {

using namespace roadgen;

RoadGenome sample_genome(std::uint64_t seed) {
  GAConfig cfg;
  Rng rng(seed);
  return init_random(1, rng, cfg).front();
}

void BM_Reconstruct(benchmark::State& state) {
  const RoadGenome g = sample_genome(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(reconstruct(g, Pose{}));
  }
}
BENCHMARK(BM_Reconstruct);

void BM_Validate(benchmark::State& state) {
  const RoadGenome g = sample_genome(2);
  const CartesianRoad road = reconstruct(g, Pose{});
  for (auto _ : state) {
    benchmark::DoNotOptimize(validate(road, g));
  }
}
BENCHMARK(BM_Validate);

void BM_Smooth(benchmark::State& state) {
  const RoadGenome g = sample_genome(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(smooth(g, 0.01));
  }
}
BENCHMARK(BM_Smooth);

void BM_Forward(benchmark::State& state) {
  DiscriminatorConfig cfg;
  cfg.d_model = static_cast<int>(state.range(0));
  cfg.n_layers = static_cast<int>(state.range(1));
  cfg.n_heads = 8;
  const TransformerModel model = TransformerModel::random_init(cfg, 7);
  const RoadGenome g = sample_genome(4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(g));
  }
}
BENCHMARK(BM_Forward)->Args({64, 4})->Args({128, 6});

void BM_ForwardMany(benchmark::State& state) {
  DiscriminatorConfig cfg;
  cfg.d_model = 64;
  cfg.n_layers = 4;
  cfg.n_heads = 8;
  const TransformerModel model = TransformerModel::random_init(cfg, 7);
  GAConfig ga;
  Rng rng(5);
  const std::vector<RoadGenome> pool = init_random(static_cast<int>(state.range(0)), rng, ga);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward_many(pool));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardMany)->Arg(32)->Arg(256);

void BM_Simulate(benchmark::State& state) {
  const RoadGenome g = sample_genome(6);
  const CartesianRoad road = reconstruct(g, Pose{});
  const SimulatorConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate(road, cfg));
  }
}
BENCHMARK(BM_Simulate);

}  // namespace

BENCHMARK_MAIN();
