#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "detbench/dataset.hpp"
#include "detbench/errors.hpp"
#include "detbench/smoothing.hpp"

using namespace detbench;

namespace {

ImageTensor natural(std::size_t side, std::uint64_t seed) {
  RngStream rng = RngStream::derive(seed, {"natural"});
  return synth_image(ImageClass::Natural, {}, {}, side, rng);
}

WatermarkDetectorConfig small_config(std::uint64_t seed) {
  CodecParams p;
  p.chips_per_bit = 8;
  p.strength = 0.08;
  RngStream rng = RngStream::derive(seed, {"w_t"});
  return WatermarkDetectorConfig::make(p, BitString::random(32, rng));
}

SmoothedStatistic stat_of(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  SmoothedStatistic s;
  s.median_mismatches = median_of_sorted(samples);
  s.sorted_samples = std::move(samples);
  return s;
}

}  // namespace

TEST(Smoothing, ConfigValidation) {
  SmoothingConfig sm;
  sm.n_samples = 0;
  EXPECT_THROW(sm.validate(), ConfigError);
  sm = {};
  sm.noise_std = 0;
  EXPECT_THROW(sm.validate(), ConfigError);
}

TEST(Smoothing, MedianConvention) {
  EXPECT_EQ(median_of_sorted({3}), 3);
  EXPECT_EQ(median_of_sorted({1, 2, 9}), 2);
  EXPECT_EQ(median_of_sorted({1, 2, 4, 9}), 3);
  EXPECT_THROW(median_of_sorted({}), PreconditionError);
}

TEST(Smoothing, MedianBreakdownBound) {
  // Corrupting t < n/2 samples keeps the median between the original order
  // statistics t positions either side of it. Exhaustive over corruption sets.
  RngStream rng = RngStream::derive(1, {"median"});
  for (std::size_t n = 1; n <= 9; ++n) {
    std::vector<double> base(n);
    for (auto& v : base) v = std::floor(rng.uniform(0, 10));
    std::sort(base.begin(), base.end());
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      const auto t = static_cast<std::size_t>(__builtin_popcount(mask));
      if (2 * t >= n) continue;
      const std::size_t lo_idx = (n - 1) / 2 - t, hi_idx = n / 2 + t;
      for (double junk : {-1e9, 1e9, 5.5}) {
        std::vector<double> c = base;
        for (std::size_t i = 0; i < n; ++i)
          if (mask >> i & 1u) c[i] = junk * (i % 2 ? 1 : -1);
        std::sort(c.begin(), c.end());
        const double m = median_of_sorted(c);
        EXPECT_GE(m, base[lo_idx]) << n << " " << mask;
        EXPECT_LE(m, base[hi_idx]) << n << " " << mask;
      }
    }
  }
}

TEST(Smoothing, SingleSampleAndDeterminism) {
  const WatermarkDetectorConfig cfg = small_config(2);
  const ImageTensor x = natural(64, 2);
  SmoothingConfig sm{1, 0.1, 7};
  const SmoothedStatistic one = smoothed_statistic(x, cfg, sm, 3);
  ASSERT_EQ(one.sorted_samples.size(), 1u);
  EXPECT_EQ(one.median_mismatches, one.sorted_samples[0]);
  sm.n_samples = 25;
  const SmoothedStatistic a = smoothed_statistic(x, cfg, sm, 3), b = smoothed_statistic(x, cfg, sm, 3);
  EXPECT_EQ(a.sorted_samples, b.sorted_samples);
  EXPECT_TRUE(std::is_sorted(a.sorted_samples.begin(), a.sorted_samples.end()));
  // Sample j of image i depends on (seed, i, j) only.
  EXPECT_EQ(smoothed_statistic(x, cfg, {1, 0.1, 7}, 3).sorted_samples[0],
            smoothed_statistic(x, cfg, {1, 0.1, 7}, 3).sorted_samples[0]);
}

TEST(Smoothing, WatermarkedImageDetectedWithZeroMedian) {
  const WatermarkDetectorConfig cfg = WatermarkDetectorConfig::make(CodecParams{}, BitString::zeros(32));
  const WatermarkCodec codec(cfg.params);
  const ImageTensor x = codec.embed(natural(256, 4), cfg.w_t);
  const SmoothingConfig sm{100, 0.1, 1};
  const DetectionVerdict v = smoothed_detect(x, cfg, sm);
  EXPECT_EQ(v.label, 1);
  EXPECT_EQ(v.statistic, 0.0);
  EXPECT_GT(certified_radius(x, cfg, sm), 0.0);
}

TEST(Smoothing, ThresholdRule) {
  const WatermarkDetectorConfig cfg = WatermarkDetectorConfig::make(CodecParams{}, BitString::zeros(32));
  EXPECT_EQ(mismatch_threshold(cfg), 6.0);
  EXPECT_EQ(smoothed_verdict(stat_of({5, 5, 5}), cfg).label, 1);
  EXPECT_EQ(smoothed_verdict(stat_of({6, 6, 6}), cfg).label, 0);
  EXPECT_EQ(smoothed_verdict(stat_of({5, 6}), cfg).label, 1);  // median 5.5
}

TEST(Smoothing, AgreesWithPlainDetectWhenSamplesOneSided) {
  const WatermarkDetectorConfig cfg = small_config(5);
  const WatermarkCodec codec(cfg.params);
  const SmoothingConfig sm{30, 0.05, 2};
  for (std::uint64_t i = 0; i < 8; ++i) {
    ImageTensor x = natural(64, 50 + i);
    if (i % 2 == 0) x = codec.embed(x, cfg.w_t);
    const SmoothedStatistic s = smoothed_statistic(x, cfg, sm, i);
    const double thr = mismatch_threshold(cfg);
    const bool one_sided = s.sorted_samples.back() < thr || s.sorted_samples.front() >= thr;
    if (!one_sided) continue;
    EXPECT_EQ(smoothed_verdict(s, cfg).label, detect(x, cfg).label) << i;
  }
}

TEST(Certificate, OnePointDistribution) {
  const WatermarkDetectorConfig cfg = WatermarkDetectorConfig::make(CodecParams{}, BitString::zeros(32));
  const SmoothingConfig sm{100, 0.1, 0};
  const double r = certified_radius(stat_of(std::vector<double>(100, 0.0)), cfg, sm);
  EXPECT_NEAR(r, 0.1 * normal_quantile(99.0 / 100.0), 1e-12);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
  // Undetected side, all far above the threshold.
  EXPECT_NEAR(certified_radius(stat_of(std::vector<double>(100, 20.0)), cfg, sm), r, 1e-12);
}

TEST(Certificate, ZeroAtBoundaryOrWeakMajority) {
  const WatermarkDetectorConfig cfg = WatermarkDetectorConfig::make(CodecParams{}, BitString::zeros(32));
  const SmoothingConfig sm{10, 0.1, 0};
  EXPECT_EQ(certified_radius(stat_of({6, 6, 6, 6, 6, 6, 6, 6, 6, 6}), cfg, sm), 0.0);
  EXPECT_EQ(certified_radius(stat_of({0, 0, 0, 0, 0, 0, 9, 9, 9, 9}), cfg, sm), 0.0);  // (6-1)/10 = 0.5
  EXPECT_GT(certified_radius(stat_of({0, 0, 0, 0, 0, 0, 0, 9, 9, 9}), cfg, sm), 0.0);
}

TEST(Certificate, RadiusShrinksWithMargin) {
  // Moving samples across the threshold one at a time never increases R.
  const WatermarkDetectorConfig cfg = WatermarkDetectorConfig::make(CodecParams{}, BitString::zeros(32));
  const SmoothingConfig sm{50, 0.1, 0};
  std::vector<double> samples(50, 2.0);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t moved = 0; moved < 25; ++moved) {
    const double r = certified_radius(stat_of(samples), cfg, sm);
    EXPECT_LE(r, prev) << moved;
    prev = r;
    samples[moved] = 10.0;
  }
  EXPECT_EQ(prev, 0.0);
}

TEST(Certificate, PerturbationsInsideRadiusKeepVerdict) {
  const WatermarkDetectorConfig cfg = small_config(6);
  const WatermarkCodec codec(cfg.params);
  const SmoothingConfig sm{100, 0.1, 3};
  RngStream rng = RngStream::derive(6, {"spot"});
  int tested = 0;
  for (std::uint64_t i = 0; tested < 20 && i < 60; ++i) {
    ImageTensor x = natural(64, 100 + i);
    if (i % 2 == 0) x = codec.embed(x, cfg.w_t);
    const SmoothedStatistic s = smoothed_statistic(x, cfg, sm, i);
    const double r = certified_radius(s, cfg, sm);
    if (r <= 0.0) continue;
    ++tested;
    const int label = smoothed_verdict(s, cfg).label;
    for (int k = 0; k < 50; ++k) {
      ImageTensor y = x;
      std::vector<double> d(x.size());
      rng.fill_normal(d.data(), d.size());
      double norm = 0;
      for (double v : d) norm += v * v;
      norm = std::sqrt(norm);
      for (std::size_t j = 0; j < x.size(); ++j) y[j] += 0.9 * r * d[j] / norm;
      ASSERT_EQ(smoothed_detect(y, cfg, sm, i).label, label) << "image " << i << " trial " << k;
    }
  }
  EXPECT_EQ(tested, 20);
}
