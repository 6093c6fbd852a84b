// Per-draw cost of each design on uniform frames, plus the one-off setup
// (distances and standardization).
#include <benchmark/benchmark.h>

#include "sbs/distance.hpp"
#include "sbs/sampler.hpp"
#include "sbs/simulate.hpp"

namespace {

using namespace sbs;

template <typename Kind>
void draw(benchmark::State& state, Kind kind) {
  const auto N = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const Sampler sampler(generate_uniform(N, 17), kind);
  std::uint64_t r = 0;
  for (auto _ : state) {
    Rng rng = make_stream(23, {r++});
    benchmark::DoNotOptimize(sampler.draw(n, rng));
  }
  state.counters["N"] = static_cast<double>(N);
  state.counters["n"] = static_cast<double>(n);
}

void sizes(benchmark::internal::Benchmark* b) {
  for (int N : {1000, 2000, 3000}) b->Args({N, 100});
  b->Args({3000, 600});
  b->Unit(benchmark::kMillisecond);
}

void srs(benchmark::State& s) { draw(s, SrsDesign{}); }
void hpwd1(benchmark::State& s) { draw(s, HpwdDesign{1}); }
void hpwd10(benchmark::State& s) { draw(s, HpwdDesign{10}); }
void lpm1(benchmark::State& s) { draw(s, LpmDesign{1}); }
void lpm2(benchmark::State& s) { draw(s, LpmDesign{2}); }
void scps(benchmark::State& s) { draw(s, ScpsDesign{}); }
void pwd5(benchmark::State& s) { draw(s, PwdDesign{5, 0}); }

BENCHMARK(srs)->Apply(sizes);
BENCHMARK(hpwd1)->Apply(sizes);
BENCHMARK(hpwd10)->Apply(sizes);
BENCHMARK(lpm1)->Apply(sizes);
BENCHMARK(lpm2)->Apply(sizes);
BENCHMARK(scps)->Apply(sizes);
BENCHMARK(pwd5)->Args({1000, 100})->Args({3000, 600})->Unit(benchmark::kMillisecond)->Iterations(3);

void standardize_setup(benchmark::State& state) {
  const auto N = static_cast<std::size_t>(state.range(0));
  const DistanceMatrix d = build_distances(generate_uniform(N, 29));
  for (auto _ : state) benchmark::DoNotOptimize(standardize(d));
}
BENCHMARK(standardize_setup)->Arg(1000)->Arg(3000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
