#include <cmath>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <gtest/gtest.h>

#include "detbench/dataset.hpp"
#include "detbench/errors.hpp"
#include "detbench/metrics.hpp"
#include "detbench/wmcodec.hpp"

using namespace detbench;
using boost::multiprecision::cpp_int;

namespace {

ImageTensor natural(std::size_t side, std::uint64_t seed) {
  RngStream rng = RngStream::derive(seed, {"natural"});
  return synth_image(ImageClass::Natural, {}, {}, side, rng);
}

ImageTensor noise_image(std::size_t side, RngStream& rng) {
  ImageTensor img(side, side, 3);
  for (double& v : img.data()) v = rng.uniform();
  return img;
}

// Exact tail count sum_{j >= k} C(n, j), by Pascal's rule.
cpp_int tail_count_oracle(std::size_t n, std::size_t k) {
  std::vector<cpp_int> row(n + 1, 0);
  row[0] = 1;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = i; j > 0; --j) row[j] += row[j - 1];
  cpp_int s = 0;
  for (std::size_t j = k; j <= n; ++j) s += row[j];
  return s;
}

// Minimal k with tail(k) / 2^n <= p, compared as tail(k) * D <= N * 2^n with p = N / D exactly.
std::size_t tau_oracle(std::size_t n, double p) {
  int e = 0;
  const double m = std::frexp(p, &e);
  const auto mant = static_cast<long long>(std::ldexp(m, 53));
  cpp_int num = mant, den = 1;
  const int shift = e - 53;
  if (shift >= 0) num <<= shift;
  else den <<= -shift;
  for (std::size_t k = 0; k <= n; ++k)
    if (tail_count_oracle(n, k) * den <= num * (cpp_int(1) << n)) return k;
  return n + 1;
}

CodecParams small_params() {
  CodecParams p;
  p.chips_per_bit = 8;
  return p;
}

}  // namespace

TEST(BitString, Basics) {
  RngStream rng = RngStream::derive(1, {"bits"});
  const BitString w = BitString::random(32, rng);
  EXPECT_EQ(bitwise_accuracy(w, w), 1.0);
  EXPECT_EQ(bitwise_accuracy(w, w.complement()), 0.0);
  BitString v = w;
  for (std::size_t i = 0; i < 8; ++i) v.set(i, !w[i]);
  EXPECT_DOUBLE_EQ(bitwise_accuracy(w, v), 0.75);
  EXPECT_THROW(bitwise_accuracy(w, BitString::zeros(31)), ShapeError);
}

TEST(BitString, HexIsMsbFirst) {
  BitString b = BitString::zeros(8);
  b.set(0, true);
  b.set(7, true);
  EXPECT_EQ(b.to_hex(), "81");
  EXPECT_EQ(BitString::from_hex("81", 8), b);
  RngStream rng = RngStream::derive(2, {"hex"});
  for (std::size_t n : {1u, 5u, 32u, 48u}) {
    const BitString w = BitString::random(n, rng);
    EXPECT_EQ(BitString::from_hex(w.to_hex(), n), w);
  }
  EXPECT_ANY_THROW(BitString::from_hex("zz", 8));
}

TEST(Codec, ParamsValidate) {
  CodecParams p;
  p.strength = 0;
  EXPECT_THROW(p.validate(), ParameterError);
  p = {};
  p.band = {0.4, 0.3};
  EXPECT_THROW(p.validate(), ParameterError);
  p = {};
  p.n_bits = 0;
  EXPECT_THROW(p.validate(), ParameterError);
}

TEST(Codec, CapacityError) {
  CodecParams p;
  p.chips_per_bit = 256;
  const WatermarkCodec codec(p);
  const ImageTensor img = natural(256, 1);
  try {
    codec.embed(img, BitString::zeros(32));
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    EXPECT_EQ(e.required(), 32u * 256u);
    EXPECT_EQ(e.available(), codec.band_capacity(256, 256));
  }
}

TEST(Codec, BandCapacityCountsRadialBand) {
  const WatermarkCodec codec(CodecParams{});
  for (std::size_t n : {64u, 100u, 256u}) {
    std::size_t count = 0;
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = 0; v < n; ++v) {
        const double r = std::hypot(double(u) / n, double(v) / n);
        if (r >= 0.05 && r <= 0.35) ++count;
      }
    EXPECT_EQ(codec.band_capacity(n, n), count) << n;
  }
}

TEST(Codec, RoundTripOnNaturalImages) {
  const WatermarkCodec codec(CodecParams{});
  RngStream rng = RngStream::derive(3, {"rt"});
  for (std::uint64_t i = 0; i < 100; ++i) {
    const ImageTensor x = natural(256, 100 + i % 20);
    const BitString w = BitString::random(32, rng);
    const ImageTensor y = codec.embed(x, w);
    ASSERT_EQ(codec.decode_bits(y), w) << i;
    if (i < 10) {
      EXPECT_GE(psnr(y, x), 40.0);
      const SoftDecode s = codec.decode_soft(y);
      for (std::size_t b = 0; b < 32; ++b) EXPECT_EQ(s.correlation[b] > 0, w[b] == 1);
    }
  }
}

TEST(Codec, ComplementAndZeroStrength) {
  const ImageTensor x = natural(256, 4);
  RngStream rng = RngStream::derive(4, {"c"});
  const BitString w = BitString::random(32, rng);
  const WatermarkCodec codec(CodecParams{});
  EXPECT_EQ(codec.decode_bits(codec.embed_scaled(x, w, -1.0)), w.complement());
  CodecParams tiny;
  tiny.strength = 1e-300;
  tiny.host_rejection = 0.0;
  const ImageTensor same = WatermarkCodec(tiny).embed(x, w);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(same[i], x[i], 1e-15);
}

TEST(Codec, PlainAdditiveEmbedShiftsCorrelationByOne) {
  // Without host rejection, s_i(embed(x)) - s_i(x) = 2 w_i - 1 when nothing clips.
  CodecParams p;
  p.host_rejection = 0.0;
  const WatermarkCodec codec(p);
  ImageTensor x = natural(256, 5);
  for (double& v : x.data()) v = 0.25 + 0.5 * v;
  RngStream rng = RngStream::derive(5, {"w"});
  const BitString w = BitString::random(32, rng);
  const auto before = codec.decode_soft(x).correlation;
  const auto after = codec.decode_soft(codec.embed(x, w)).correlation;
  for (std::size_t b = 0; b < 32; ++b) EXPECT_NEAR(after[b] - before[b], 2.0 * w[b] - 1.0, 1e-9);
}

TEST(Codec, DecodeIsDeterministic) {
  const ImageTensor x = natural(128, 6);
  const WatermarkCodec codec(small_params());
  EXPECT_EQ(codec.decode_soft(x).correlation, codec.decode_soft(x).correlation);
}

TEST(Codec, NoiseImagesDecodeToFairBits) {
  const WatermarkCodec codec(CodecParams{});
  RngStream rng = RngStream::derive(7, {"noise"});
  std::size_t ones = 0;
  for (int i = 0; i < 1000; ++i) {
    const BitString b = codec.decode_bits(noise_image(256, rng));
    for (auto v : b.bits()) ones += v;
  }
  const double frac = ones / 32000.0;
  EXPECT_GE(frac, 0.49);
  EXPECT_LE(frac, 0.51);
}

TEST(Codec, KeySeparation) {
  CodecParams other;
  other.key = 0xABCDEF;
  const WatermarkCodec codec(CodecParams{}), wrong(other);
  RngStream rng = RngStream::derive(8, {"key"});
  double acc = 0;
  const int n = 40;
  for (int i = 0; i < n; ++i) {
    const BitString w = BitString::random(32, rng);
    acc += bitwise_accuracy(wrong.decode_bits(codec.embed(natural(256, 200 + i), w)), w);
  }
  EXPECT_GE(acc / n, 0.35);
  EXPECT_LE(acc / n, 0.65);
}

TEST(Codec, SoftDistanceGradientMatchesFiniteDifferences) {
  CodecParams p = small_params();
  p.strength = 0.05;
  const WatermarkCodec codec(p);
  const ImageTensor x = natural(64, 9);
  RngStream rng = RngStream::derive(9, {"fd"});
  const BitString t = BitString::random(32, rng);
  for (bool squared : {true, false}) {
    const BitDistance d = codec.bit_distance(x, t, true, squared);
    auto f = [&](const ImageTensor& img) {
      const BitDistance e = codec.bit_distance(img, t, false);
      return squared ? e.squared : e.distance;
    };
    for (int k = 0; k < 10; ++k) {
      const std::size_t i = rng.below(x.size());
      const double h = 1e-5;
      ImageTensor xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (f(xp) - f(xm)) / (2 * h);
      const double g = d.gradient[i];
      EXPECT_LT(std::abs(fd - g), 1e-4 * std::max(std::abs(g), 1e-3)) << "pixel " << i << " squared " << squared;
    }
  }
}

TEST(Codec, CorrelationGradientIsLinearMap) {
  // s is linear in pixels: s(x + eps e_i) - s(x) = eps * ds/dx_i.
  const WatermarkCodec codec(small_params());
  const ImageTensor x = natural(64, 10);
  std::vector<double> df(32, 0.0);
  df[3] = 1.0;
  const ImageTensor g = codec.correlation_gradient(x, df);
  RngStream rng = RngStream::derive(10, {"lin"});
  for (int k = 0; k < 10; ++k) {
    const std::size_t i = rng.below(x.size());
    ImageTensor xp = x;
    xp[i] += 0.01;
    const double ds = codec.decode_soft(xp).correlation[3] - codec.decode_soft(x).correlation[3];
    EXPECT_NEAR(ds, 0.01 * g[i], 1e-10 + 1e-8 * std::abs(ds));
  }
}

TEST(Codec, IncrementalDecoderMatchesFullDecode) {
  const WatermarkCodec codec(CodecParams{});
  const ImageTensor x = natural(256, 11);
  WatermarkCodec::IncrementalDecoder inc(codec, x);
  EXPECT_EQ(inc.correlations().size(), 32u);
  RngStream rng = RngStream::derive(11, {"inc"});
  ImageTensor cur = x;
  for (int step = 0; step < 6; ++step) {
    const auto h = static_cast<Eigen::Index>(1 + rng.below(40)), w = static_cast<Eigen::Index>(1 + rng.below(40));
    const auto y0 = static_cast<Eigen::Index>(rng.below(256 - h)), x0 = static_cast<Eigen::Index>(rng.below(256 - w));
    ImageTensor cand = cur;
    for (Eigen::Index y = y0; y < y0 + h; ++y)
      for (Eigen::Index xx = x0; xx < x0 + w; ++xx)
        for (std::size_t c = 0; c < 3; ++c) cand.at(y, xx, c) = rng.uniform();
    const Plane patch = luma_plane(cand).block(y0, x0, h, w);
    const auto proposed = inc.propose(y0, x0, patch);
    const auto full = codec.decode_soft(cand).correlation;
    for (std::size_t b = 0; b < 32; ++b) EXPECT_NEAR(proposed[b], full[b], 1e-9);
    if (step % 2 == 0) {
      inc.accept();
      cur = cand;
    }
    const auto committed = codec.decode_soft(cur).correlation;
    for (std::size_t b = 0; b < 32; ++b) EXPECT_NEAR(inc.correlations()[b], committed[b], 1e-9);
  }
}

TEST(Calibrate, MatchesBigIntegerOracle) {
  EXPECT_EQ(calibrate_tau(32, 1e-4), 27u);
  EXPECT_EQ(tau_oracle(32, 1e-4), 27u);
  EXPECT_EQ(calibrate_tau(1, 0.6), 1u);
  EXPECT_NEAR(binomial_tail(32, 26), 2.68e-4, 5e-7);
  EXPECT_NEAR(binomial_tail(32, 27), 5.65e-5, 5e-8);
  EXPECT_EQ(calibrate_tau(48, 1e-4), tau_oracle(48, 1e-4));
  EXPECT_EQ(calibrate_tau(48, 1e-4), 38u);
  EXPECT_GT(binomial_tail(48, 37), 1e-4);
  EXPECT_THROW(calibrate_tau(4, 0.01), InfeasibleError);
  EXPECT_THROW(calibrate_tau(32, 0.0), ParameterError);
  EXPECT_THROW(calibrate_tau(32, 1.0), ParameterError);
}

TEST(Calibrate, RandomCasesAgreeWithOracle) {
  RngStream rng = RngStream::derive(12, {"tau"});
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + rng.below(64);
    const double p = std::pow(10.0, -rng.uniform(0.0, 8.0));
    const std::size_t expect = tau_oracle(n, p);
    if (expect > n) EXPECT_THROW(calibrate_tau(n, p), InfeasibleError) << n << " " << p;
    else EXPECT_EQ(calibrate_tau(n, p), expect) << n << " " << p;
  }
}

TEST(Calibrate, TailAgreesWithOracle) {
  for (std::size_t n : {8u, 32u, 48u, 64u})
    for (std::size_t k = 0; k <= n; k += 3) {
      const double exact = static_cast<double>(tail_count_oracle(n, k)) / std::ldexp(1.0, static_cast<int>(n));
      EXPECT_NEAR(binomial_tail(n, k), exact, 1e-15 + 1e-12 * exact);
    }
}

TEST(Detect, ThresholdIsInclusiveAtTau) {
  const WatermarkDetectorConfig cfg = WatermarkDetectorConfig::make(CodecParams{}, BitString::zeros(32));
  EXPECT_EQ(cfg.tau_matches, 27u);
  const WatermarkCodec codec(cfg.params);
  const ImageTensor x = natural(256, 13);
  // Build images decoding to exactly tau and tau - 1 matches.
  for (std::size_t matches : {cfg.tau_matches, cfg.tau_matches - 1}) {
    BitString bits = BitString::zeros(32);
    for (std::size_t i = matches; i < 32; ++i) bits.set(i, true);
    const DetectionVerdict v = detect(codec.embed(x, bits), cfg);
    EXPECT_EQ(v.statistic, static_cast<double>(matches));
    EXPECT_EQ(v.label, matches >= cfg.tau_matches ? 1 : 0);
    EXPECT_DOUBLE_EQ(v.normalized_accuracy, matches / 32.0);
  }
}

TEST(Detect, ConfigValidation) {
  WatermarkDetectorConfig cfg = WatermarkDetectorConfig::make(CodecParams{}, BitString::zeros(32));
  cfg.tau_matches = 20;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = WatermarkDetectorConfig::make(CodecParams{}, BitString::zeros(32));
  cfg.w_t = BitString::zeros(31);
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Detect, MatchCountsOnCleanImagesAreBinomial) {
  const WatermarkCodec codec(CodecParams{});
  RngStream rng = RngStream::derive(14, {"fpr"});
  const int n = 2000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const BitString w_t = BitString::random(32, rng);
    const double m = static_cast<double>(matching_bits(codec.decode_bits(noise_image(64 * 4, rng)), w_t));
    s += m;
    s2 += m * m;
  }
  const double mean = s / n, var = s2 / n - mean * mean;
  EXPECT_NEAR(mean, 16.0, 4 * std::sqrt(8.0 / n));
  EXPECT_NEAR(var, 8.0, 1.0);
}

TEST(Tune, EmptyPerturbationSetPicksWeakestCleanCandidate) {
  std::vector<ImageTensor> images = {natural(256, 15), natural(256, 16)};
  TuneOptions opts;
  opts.strengths = {0.02, 0.01};
  opts.chips = {128, 96};
  const TuneResult r = tune_robustness(CodecParams{}, {}, images, opts, RngStream::derive(15, {"tune"}));
  EXPECT_EQ(r.params.strength, 0.01);
  EXPECT_EQ(r.params.chips_per_bit, 96u);
  EXPECT_TRUE(r.evaluated.empty());
  EXPECT_EQ(r.sweep.size(), 4u);
}

TEST(Tune, ImpossibleTargetFails) {
  std::vector<ImageTensor> images = {natural(256, 17)};
  TuneOptions opts;
  opts.strengths = {0.01};
  opts.chips = {64};
  opts.min_psnr = 90;
  EXPECT_THROW(tune_robustness(CodecParams{}, SeenPerturbationRanges::defaults(), images, opts, RngStream()),
               TuningError);
}

TEST(Tune, AccuracyUnderNoiseGrowsWithChips) {
  // Redundancy averaging: more chips per bit, better accuracy under the same noise.
  std::vector<ImageTensor> images;
  for (int i = 0; i < 6; ++i) images.push_back(natural(256, 300 + i));
  SeenPerturbationRanges noise_only = SeenPerturbationRanges::defaults();
  TuneOptions opts;
  opts.strengths = {0.01};
  opts.chips = {32, 64, 128, 192};
  opts.target_accuracy = 0.0;
  opts.min_psnr = 0.0;
  const TuneResult r = tune_robustness(CodecParams{}, noise_only, images, opts, RngStream::derive(16, {"mono"}));
  std::size_t noise_idx = 0;
  for (std::size_t j = 0; j < r.evaluated.size(); ++j)
    if (r.evaluated[j].kind == PerturbationKind::GaussianNoise) noise_idx = j;
  double prev = 0.0;
  for (const auto& c : r.sweep) {
    ASSERT_TRUE(c.fits);
    EXPECT_GE(c.accuracy_per_perturbation[noise_idx] + 1e-12, prev) << c.chips_per_bit;
    prev = c.accuracy_per_perturbation[noise_idx];
  }
}
