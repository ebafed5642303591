#include <benchmark/benchmark.h>

#include "potemkin/interpretation.hpp"
#include "potemkin/rng.hpp"
#include "potemkin/solver.hpp"

using namespace potemkin;

namespace {

ConceptSpec random_concept(std::uint64_t seed, std::size_t n_instances,
                           std::size_t n_extra) {
  SplitMix64 rng(seed);
  std::vector<Instance> instances;
  for (std::size_t i = 0; i < n_instances; ++i) {
    instances.push_back({"x" + std::to_string(i), ""});
  }
  auto random_interp = [&](std::string id) {
    Interpretation f{std::move(id), std::vector<Bit>(n_instances, 0)};
    for (auto& bit : f.values) bit = static_cast<Bit>(rng.below(2));
    return f;
  };
  auto f_star = random_interp("f_star");
  std::vector<Interpretation> human;
  human.push_back(f_star);
  for (std::size_t k = 0; k < n_extra; ++k) {
    human.push_back(random_interp("h" + std::to_string(k)));
  }
  return ConceptSpec("bench", InstanceSpace(std::move(instances)), std::move(f_star),
                     std::move(human));
}

}  // namespace

static void BM_GreedyKeystone(benchmark::State& state) {
  auto spec = random_concept(17, state.range(0), state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(greedy_keystone(spec));
  }
}
BENCHMARK(BM_GreedyKeystone)->Args({12, 32})->Args({24, 128})->Args({48, 512});

static void BM_MinimumKeystone(benchmark::State& state) {
  auto spec = random_concept(17, state.range(0), state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(minimum_keystone(spec));
  }
}
BENCHMARK(BM_MinimumKeystone)->Args({12, 32})->Args({24, 128})->Args({48, 512});

static void BM_EnumerateMinimalKeystones(benchmark::State& state) {
  auto spec = random_concept(17, state.range(0), state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(enumerate_minimal_keystones(spec, 256));
  }
}
BENCHMARK(BM_EnumerateMinimalKeystones)->Args({12, 32})->Args({16, 64});

static void BM_IsKeystone(benchmark::State& state) {
  auto spec = random_concept(29, state.range(0), state.range(1));
  auto ks = minimum_keystone(spec);
  for (auto _ : state) {
    benchmark::DoNotOptimize(is_keystone(ks.instance_indices, spec));
  }
}
BENCHMARK(BM_IsKeystone)->Args({24, 128})->Args({48, 512});

BENCHMARK_MAIN();
