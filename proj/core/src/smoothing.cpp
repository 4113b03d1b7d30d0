#include "detbench/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>

#include "detbench/errors.hpp"

namespace detbench {

void SmoothingConfig::validate() const {
  if (n_samples == 0) throw ConfigError("smoothing: n must be at least 1");
  if (!(noise_std > 0.0) || !std::isfinite(noise_std)) throw ConfigError("smoothing: sigma must be positive");
}

double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double median_of_sorted(const std::vector<double>& sorted) {
  if (sorted.empty()) throw PreconditionError("median of an empty sample");
  const std::size_t n = sorted.size();
  return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

double mismatch_threshold(const WatermarkDetectorConfig& cfg) {
  return static_cast<double>(cfg.params.n_bits - cfg.tau_matches + 1);
}

SmoothedStatistic smoothed_statistic(const ImageTensor& img, const WatermarkDetectorConfig& cfg,
                                     const SmoothingConfig& sm, std::uint64_t image_index) {
  sm.validate();
  const WatermarkCodec codec(cfg.params);
  const RngStream base = RngStream::derive(sm.seed, {"smoothing", image_index});
  SmoothedStatistic out;
  out.sorted_samples.reserve(sm.n_samples);
  ImageTensor noisy = img;
  for (std::size_t j = 0; j < sm.n_samples; ++j) {
    RngStream noise = base.child(j);
    const auto src = img.data();
    auto dst = noisy.data();
    noise.fill_normal(dst.data(), dst.size(), sm.noise_std);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
    const std::size_t matches = matching_bits(codec.decode_bits(noisy), cfg.w_t);
    out.sorted_samples.push_back(static_cast<double>(cfg.params.n_bits - matches));
  }
  std::sort(out.sorted_samples.begin(), out.sorted_samples.end());
  out.median_mismatches = median_of_sorted(out.sorted_samples);
  return out;
}

DetectionVerdict smoothed_verdict(const SmoothedStatistic& stat, const WatermarkDetectorConfig& cfg) {
  const double n = static_cast<double>(cfg.params.n_bits);
  return {stat.median_mismatches < mismatch_threshold(cfg) ? 1 : 0, stat.median_mismatches,
          (n - stat.median_mismatches) / n};
}

DetectionVerdict smoothed_detect(const ImageTensor& img, const WatermarkDetectorConfig& cfg, const SmoothingConfig& sm,
                                 std::uint64_t image_index) {
  return smoothed_verdict(smoothed_statistic(img, cfg, sm, image_index), cfg);
}

double certified_radius(const SmoothedStatistic& stat, const WatermarkDetectorConfig& cfg, const SmoothingConfig& sm) {
  sm.validate();
  const auto& s = stat.sorted_samples;
  if (s.empty()) throw PreconditionError("certified_radius: no samples");
  const double threshold = mismatch_threshold(cfg);
  if (stat.median_mismatches == threshold) return 0.0;
  const bool detected = stat.median_mismatches < threshold;
  const auto k = detected ? std::count_if(s.begin(), s.end(), [&](double v) { return v < threshold; })
                          : std::count_if(s.begin(), s.end(), [&](double v) { return v > threshold; });
  const double q = static_cast<double>(k - 1) / static_cast<double>(s.size());
  if (q <= 0.5) return 0.0;
  return sm.noise_std * normal_quantile(q);
}

double certified_radius(const ImageTensor& img, const WatermarkDetectorConfig& cfg, const SmoothingConfig& sm,
                        std::uint64_t image_index) {
  return certified_radius(smoothed_statistic(img, cfg, sm, image_index), cfg, sm);
}

}  // namespace detbench
