#include <benchmark/benchmark.h>

#include "detbench/dct.hpp"
#include "detbench/rng.hpp"

using namespace detbench;

namespace {

Plane random_plane(Eigen::Index n) {
  RngStream rng = RngStream::derive(1, {"bench-dct"});
  Plane p(n, n);
  for (auto& v : p.reshaped()) v = rng.uniform();
  return p;
}

void BM_DctFull(benchmark::State& state) {
  const Plane p = random_plane(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(dct2(p, DctMode::Full));
}
BENCHMARK(BM_DctFull)->Arg(64)->Arg(128)->Arg(256);

void BM_DctBlock8(benchmark::State& state) {
  const Plane p = random_plane(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(dct2(p, DctMode::Block8));
}
BENCHMARK(BM_DctBlock8)->Arg(64)->Arg(256);

void BM_IdctFull(benchmark::State& state) {
  const Spectrum s = dct2(random_plane(state.range(0)), DctMode::Full);
  for (auto _ : state) benchmark::DoNotOptimize(idct2(s));
}
BENCHMARK(BM_IdctFull)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
