#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "detbench/image.hpp"
#include "detbench/perturb.hpp"
#include "detbench/rng.hpp"

namespace detbench {

class BitString {
 public:
  BitString() = default;
  explicit BitString(std::vector<std::uint8_t> bits);

  static BitString zeros(std::size_t n);
  static BitString random(std::size_t n, RngStream& rng);
  // MSB-first hex; the first character's high bit is bit 0.
  static BitString from_hex(std::string_view hex, std::size_t n_bits);
  std::string to_hex() const;

  std::size_t size() const noexcept { return bits_.size(); }
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  void set(std::size_t i, bool v) { bits_.at(i) = v ? 1 : 0; }
  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }
  BitString complement() const;

  friend bool operator==(const BitString&, const BitString&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

std::size_t matching_bits(const BitString& a, const BitString& b);
// matches / n. Throws ShapeError on length mismatch.
double bitwise_accuracy(const BitString& a, const BitString& b);

// Radial band as a fraction of Nyquist: r(u, v) = hypot(u / H, v / W).
struct FrequencyBand {
  double lo = 0.05;
  double hi = 0.35;
  friend bool operator==(const FrequencyBand&, const FrequencyBand&) = default;
};

struct CodecParams {
  std::uint64_t key = 0x5EEDC0DEULL;
  std::size_t n_bits = 32;
  std::size_t chips_per_bit = 128;
  double strength = 0.02;  // per-chip amplitude in orthonormal DCT units
  FrequencyBand band;
  double soft_sharpness = 4.0;
  // Fraction of each bit's host projection removed while embedding
  // (0 = plain additive spread spectrum).
  double host_rejection = 1.0;

  void validate() const;
  friend bool operator==(const CodecParams&, const CodecParams&) = default;
};

// Soft decoder output: normalized correlations s_i and sigmoid(gamma s_i).
struct SoftDecode {
  std::vector<double> correlation;
  std::vector<double> soft;
};

// l2 distance between soft bits and a target bitstring, with optional
// pixel gradient.
struct BitDistance {
  double distance = 0.0;
  double squared = 0.0;
  ImageTensor gradient;  // of `distance` (or `squared`, see bit_distance)
};

// Spread-spectrum codec on the grayscale full-image DCT. Each bit owns a
// disjoint pseudorandom set of mid-band coefficients with +-1 chips derived
// from the key.
class WatermarkCodec {
 public:
  explicit WatermarkCodec(CodecParams params);

  const CodecParams& params() const noexcept { return params_; }

  // Number of DCT coefficients inside the band for an H x W image.
  std::size_t band_capacity(std::size_t height, std::size_t width) const;

  ImageTensor embed(const ImageTensor& img, const BitString& bits) const;
  // Embeds with amplitude gain * strength; gain -1 writes the complement.
  ImageTensor embed_scaled(const ImageTensor& img, const BitString& bits, double gain) const;

  SoftDecode decode_soft(const ImageTensor& img) const;
  BitString decode_bits(const ImageTensor& img) const;

  // Pixel gradient of f(s) given df/ds_i for every bit.
  ImageTensor correlation_gradient(const ImageTensor& like, std::span<const double> df_ds) const;

  // distance = ||soft(img) - target||_2. When `squared_gradient` is set the
  // gradient is of the squared distance instead.
  BitDistance bit_distance(const ImageTensor& img, const BitString& target, bool with_gradient,
                           bool squared_gradient = false) const;

  struct Layout;
  class IncrementalDecoder;

 private:
  std::shared_ptr<const Layout> layout(std::size_t height, std::size_t width) const;
  std::vector<double> correlations(const Layout& layout, const Plane& luma) const;

  CodecParams params_;
};

// Keeps the band coefficients of one image so that a change confined to a
// rectangle costs a small transform instead of a full decode.
class WatermarkCodec::IncrementalDecoder {
 public:
  IncrementalDecoder(const WatermarkCodec& codec, const ImageTensor& img);

  const std::vector<double>& correlations() const noexcept { return current_; }

  // Correlations if the luma inside the rectangle at (y0, x0) became `patch`.
  const std::vector<double>& propose(Eigen::Index y0, Eigen::Index x0, const Plane& patch);
  void accept();

 private:
  const WatermarkCodec* codec_;
  std::shared_ptr<const Layout> layout_;
  Plane luma_;
  Plane coeffs_;
  Plane pending_coeffs_;
  Plane pending_patch_;
  Eigen::Index pending_y0_ = -1;
  Eigen::Index pending_x0_ = -1;
  std::vector<double> current_;
  std::vector<double> pending_;
};

// P[Binomial(n, 1/2) >= k], from an exact integer sum.
double binomial_tail(std::size_t n, std::size_t k);

// Minimal k with P[Binomial(n, 1/2) >= k] <= fpr_target, compared exactly.
// Throws InfeasibleError when even k = n exceeds the target.
std::size_t calibrate_tau(std::size_t n_bits, double fpr_target);

struct WatermarkDetectorConfig {
  CodecParams params;
  BitString w_t;
  std::size_t tau_matches = 0;  // detect iff matches >= tau_matches
  double fpr_target = 1e-4;

  // Calibrates tau_matches for the given target.
  static WatermarkDetectorConfig make(const CodecParams& params, BitString w_t, double fpr_target = 1e-4);
  void validate() const;
};

struct DetectionVerdict {
  int label = 0;  // 1 = AI-generated
  double statistic = 0.0;
  double normalized_accuracy = 0.0;
};

DetectionVerdict detect(const ImageTensor& img, const WatermarkDetectorConfig& cfg);

struct TuneOptions {
  std::vector<double> strengths = {0.01, 0.015, 0.02, 0.025, 0.03, 0.04, 0.05};
  std::vector<std::size_t> chips = {64, 96, 128, 160, 192};
  double target_accuracy = 0.999;
  double min_psnr = 38.0;
  std::size_t workers = 1;
};

struct TuneCandidate {
  double strength = 0.0;
  std::size_t chips_per_bit = 0;
  bool fits = true;
  double clean_psnr = 0.0;
  double clean_accuracy = 0.0;
  double mean_accuracy = 0.0;
  std::vector<double> accuracy_per_perturbation;
  bool qualifies = false;
};

struct TuneResult {
  CodecParams params;
  std::vector<PerturbationSpec> evaluated;
  std::vector<TuneCandidate> sweep;
};

// Sweeps (strength, chips_per_bit) and picks the smallest-strength candidate
// whose mean bitwise accuracy under the strongest seen perturbations reaches
// target_accuracy with clean PSNR >= min_psnr. Throws TuningError when no
// candidate qualifies.
TuneResult tune_robustness(const CodecParams& base, const SeenPerturbationRanges& seen,
                           std::span<const ImageTensor> images, const TuneOptions& options, const RngStream& rng);

}  // namespace detbench
