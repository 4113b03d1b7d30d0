#include <benchmark/benchmark.h>

#include "detbench/attacks.hpp"
#include "detbench/dataset.hpp"
#include "detbench/wmcodec.hpp"

using namespace detbench;

namespace {

struct Fixture {
  WatermarkDetectorConfig cfg;
  ImageTensor image;
  Fixture() {
    RngStream rng = RngStream::derive(1, {"bench-codec"});
    cfg = WatermarkDetectorConfig::make(CodecParams{}, BitString::random(32, rng));
    image = WatermarkCodec(cfg.params).embed(synth_image(ImageClass::Natural, {}, {}, 256, rng), cfg.w_t);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_Embed(benchmark::State& state) {
  const Fixture& f = fixture();
  const WatermarkCodec codec(f.cfg.params);
  for (auto _ : state) benchmark::DoNotOptimize(codec.embed(f.image, f.cfg.w_t));
}
BENCHMARK(BM_Embed);

void BM_Detect(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(detect(f.image, f.cfg));
}
BENCHMARK(BM_Detect);

void BM_BitDistanceGradient(benchmark::State& state) {
  const Fixture& f = fixture();
  const WatermarkCodec codec(f.cfg.params);
  for (auto _ : state) benchmark::DoNotOptimize(codec.bit_distance(f.image, f.cfg.w_t, true));
}
BENCHMARK(BM_BitDistanceGradient);

// One Square-style rectangle proposal on an open session.
void BM_SessionPropose(benchmark::State& state) {
  const Fixture& f = fixture();
  const WatermarkTarget target(f.cfg, AttackMode::Removal);
  auto session = target.open_session(f.image);
  const auto side = static_cast<std::size_t>(state.range(0));
  ImageTensor cand = f.image;
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x)
      for (std::size_t c = 0; c < 3; ++c) cand.at(y + 10, x + 10, c) += 0.01;
  for (auto _ : state) benchmark::DoNotOptimize(session->propose(cand, 10, 10, side, side));
}
BENCHMARK(BM_SessionPropose)->Arg(4)->Arg(26);

}  // namespace
