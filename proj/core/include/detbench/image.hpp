#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace detbench {

// Row-major 2-D real grid. Used for luma planes and transform coefficients.
using Plane = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

// H x W x C image with real samples, row-major and channel-interleaved.
// The nominal range is [0, 1]; values outside it only exist transiently
// before a clamp.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t pixels() const noexcept { return height_ * width_; }
  bool empty() const noexcept { return data_.empty(); }

  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return data_[(y * width_ + x) * channels_ + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return data_[(y * width_ + x) * channels_ + c];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool same_shape(const ImageTensor& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  // Clamp every sample into [0, 1].
  void clamp();
  ImageTensor clamped() const;

  bool all_finite() const noexcept;

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

// Throws ShapeError unless a and b have identical dimensions.
void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* what);

// Luma 0.299R + 0.587G + 0.114B. A 1-channel input is returned unchanged.
ImageTensor to_grayscale(const ImageTensor& img);

// Luma of img as a plane (H x W).
Plane luma_plane(const ImageTensor& img);

// Adds `delta` (H x W) to every channel of img.
void add_to_all_channels(ImageTensor& img, const Plane& delta);

// Maps a luma-plane gradient back to per-channel pixel gradients
// (chain rule through to_grayscale).
ImageTensor luma_gradient_to_pixels(const Plane& grad, std::size_t channels);

// 8-bit quantization used at file boundaries: v -> round(255 * clamp(v)) / 255.
std::uint8_t quantize_sample(double v) noexcept;
ImageTensor quantize8(const ImageTensor& img);

// Compact 8-bit storage for datasets.
struct ByteImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> bytes;

  static ByteImage from_tensor(const ImageTensor& img);
  ImageTensor tensor() const;
};

// Binary PPM (P6, maxval 255) or raw float "IDBF1" files, detected by magic.
ImageTensor load_image(const std::filesystem::path& path);

// Writes binary P6. One-channel images are replicated into RGB.
void save_image(const ImageTensor& img, const std::filesystem::path& path);

// Writes the lossless raw format: "IDBF1", u32 height, u32 width, u32
// channels (little-endian), then float32 little-endian samples.
void save_image_raw(const ImageTensor& img, const std::filesystem::path& path);

}  // namespace detbench
