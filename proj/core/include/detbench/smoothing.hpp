#pragma once

#include <cstdint>
#include <vector>

#include "detbench/image.hpp"
#include "detbench/wmcodec.hpp"

namespace detbench {

struct SmoothingConfig {
  std::size_t n_samples = 100;
  double noise_std = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const SmoothingConfig&, const SmoothingConfig&) = default;
};

struct SmoothedStatistic {
  double median_mismatches = 0.0;
  std::vector<double> sorted_samples;
};

// Noise for image `image_index` comes from the stream (seed, "smoothing",
// image_index); sample j uses its child j. Noisy copies are not clamped.
SmoothedStatistic smoothed_statistic(const ImageTensor& img, const WatermarkDetectorConfig& cfg,
                                     const SmoothingConfig& sm, std::uint64_t image_index = 0);

// Mismatch count at which detection stops: n_bits - tau_matches + 1.
double mismatch_threshold(const WatermarkDetectorConfig& cfg);

// Even-n median is the midpoint of the two central order statistics.
double median_of_sorted(const std::vector<double>& sorted);

DetectionVerdict smoothed_verdict(const SmoothedStatistic& stat, const WatermarkDetectorConfig& cfg);
DetectionVerdict smoothed_detect(const ImageTensor& img, const WatermarkDetectorConfig& cfg, const SmoothingConfig& sm,
                                 std::uint64_t image_index = 0);

// Plug-in percentile certificate: with k samples strictly on the median's
// side of the threshold, R = sigma * PhiInv((k - 1) / n), floored at 0.
double certified_radius(const SmoothedStatistic& stat, const WatermarkDetectorConfig& cfg, const SmoothingConfig& sm);
double certified_radius(const ImageTensor& img, const WatermarkDetectorConfig& cfg, const SmoothingConfig& sm,
                        std::uint64_t image_index = 0);

double normal_quantile(double p);

}  // namespace detbench
