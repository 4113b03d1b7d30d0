#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "detbench/image.hpp"

namespace detbench {

// Rates are absent (not zero) when the class they condition on is absent.
struct ConfusionStats {
  std::optional<double> fnr;
  std::optional<double> fpr;
  std::optional<double> acc;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
};

// verdicts/labels are {0,1}; label 1 = AI-generated.
ConfusionStats confusion(std::span<const int> verdicts, std::span<const int> labels);

inline constexpr double kPsnrCap = 99.0;

// 10 log10(1 / MSE). Identical images give +infinity.
double psnr(const ImageTensor& a, const ImageTensor& b);
// psnr limited to kPsnrCap, the form used in reports.
double psnr_capped(const ImageTensor& a, const ImageTensor& b);

// Single-scale SSIM on luma: 11-tap Gaussian window (sigma 1.5),
// C1 = 0.01^2, C2 = 0.03^2, averaged over valid window positions.
double ssim(const ImageTensor& a, const ImageTensor& b);

}  // namespace detbench
