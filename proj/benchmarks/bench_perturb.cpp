#include <benchmark/benchmark.h>

#include "detbench/dataset.hpp"
#include "detbench/perturb.hpp"

using namespace detbench;

namespace {

const ImageTensor& image() {
  static const ImageTensor img = [] {
    RngStream rng = RngStream::derive(1, {"bench-perturb"});
    return synth_image(ImageClass::Natural, {}, {}, 256, rng);
  }();
  return img;
}

void BM_Perturb(benchmark::State& state, PerturbationKind kind, double param) {
  RngStream rng = RngStream::derive(2, {"bench-perturb"});
  for (auto _ : state) benchmark::DoNotOptimize(apply_perturbation({kind, param}, image(), rng));
}
BENCHMARK_CAPTURE(BM_Perturb, jpeg_q50, PerturbationKind::JpegCompress, 50.0);
BENCHMARK_CAPTURE(BM_Perturb, gauss_noise, PerturbationKind::GaussianNoise, 0.1);
BENCHMARK_CAPTURE(BM_Perturb, gauss_blur_r2, PerturbationKind::GaussianBlur, 2.0);
BENCHMARK_CAPTURE(BM_Perturb, elastic_a4, PerturbationKind::ElasticBlur, 4.0);

void BM_SynthImage(benchmark::State& state) {
  RngStream rng = RngStream::derive(3, {"bench-synth"});
  for (auto _ : state)
    benchmark::DoNotOptimize(synth_image(ImageClass::Generated, {}, {}, static_cast<std::size_t>(state.range(0)), rng));
}
BENCHMARK(BM_SynthImage)->Arg(256);

}  // namespace
