#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "detbench/image.hpp"
#include "detbench/rng.hpp"

namespace detbench {

enum class PerturbationKind {
  JpegCompress,
  GaussianNoise,
  RayleighNoise,
  GaussianBlur,
  Brightness,
  Contrast,
  ElasticBlur,
};

inline constexpr std::array<PerturbationKind, 7> kAllPerturbations = {
    PerturbationKind::JpegCompress, PerturbationKind::GaussianNoise, PerturbationKind::RayleighNoise,
    PerturbationKind::GaussianBlur, PerturbationKind::Brightness,    PerturbationKind::Contrast,
    PerturbationKind::ElasticBlur};

// The five kinds used during training with perturbations.
inline constexpr std::array<PerturbationKind, 5> kSeenPerturbations = {
    PerturbationKind::JpegCompress, PerturbationKind::GaussianNoise, PerturbationKind::GaussianBlur,
    PerturbationKind::Brightness, PerturbationKind::Contrast};

bool is_seen(PerturbationKind kind) noexcept;

// JSON names: jpeg, gauss_noise, rayleigh_noise, gauss_blur, brightness,
// contrast, elastic.
std::string_view to_string(PerturbationKind kind) noexcept;
PerturbationKind perturbation_from_string(std::string_view name);

// One perturbation and its intensity: quality q for JPEG, sigma for the
// noises, radius for blur, offset b, factor c, or elastic intensity alpha.
struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::Brightness;
  double param = 0.0;

  // Throws ParameterError naming the kind and the violated bound.
  void validate() const;

  friend bool operator==(const PerturbationSpec&, const PerturbationSpec&) = default;
};

ImageTensor apply_perturbation(const PerturbationSpec& spec, const ImageTensor& img, RngStream& rng);

// Individual operations. All return clamped images.
ImageTensor jpeg_compress(const ImageTensor& img, double quality);
ImageTensor gaussian_noise(const ImageTensor& img, double sigma, RngStream& rng);
ImageTensor rayleigh_noise(const ImageTensor& img, double sigma, RngStream& rng);
ImageTensor gaussian_blur(const ImageTensor& img, double radius);
ImageTensor adjust_brightness(const ImageTensor& img, double offset);
ImageTensor adjust_contrast(const ImageTensor& img, double factor);
ImageTensor elastic_blur(const ImageTensor& img, double alpha, RngStream& rng);

// Standard baseline luminance table, row-major.
const std::array<int, 64>& jpeg_base_table() noexcept;
// Table scaled for quality q with the baseline-encoder rule.
std::array<int, 64> jpeg_quant_table(double quality);

// Normalized Gaussian taps for standard deviation sigma, half-width ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

// Separable convolution of a plane with a symmetric kernel, mirror borders.
Plane convolve_separable(const Plane& plane, const std::vector<double>& kernel);

// Half-sample symmetric reflection of an index into [0, n).
std::ptrdiff_t mirror_index(std::ptrdiff_t i, std::ptrdiff_t n) noexcept;

inline constexpr double kElasticSmoothing = 8.0;

// Per-kind sampling intervals for training with perturbations.
struct SeenPerturbationRanges {
  std::map<PerturbationKind, std::pair<double, double>> ranges;

  bool empty() const noexcept { return ranges.empty(); }

  // Requires exactly the five seen kinds, non-empty intervals inside each
  // kind's parameter domain. Throws ConfigError otherwise.
  void validate() const;

  // The most intense setting(s) of each kind: lowest JPEG quality, largest
  // sigma/radius, and both ends for the two-sided brightness/contrast.
  std::vector<PerturbationSpec> strongest() const;

  static SeenPerturbationRanges defaults();
};

// Kind uniform over the five seen kinds, parameter uniform over its interval.
PerturbationSpec sample_seen_perturbation(RngStream& rng, const SeenPerturbationRanges& ranges);

}  // namespace detbench
