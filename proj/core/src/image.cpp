#include "detbench/image.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "detbench/errors.hpp"

namespace detbench {

namespace {

void check_dims(std::size_t h, std::size_t w, std::size_t c) {
  if (h == 0 || w == 0) throw ShapeError("image dimensions must be positive");
  if (c != 1 && c != 3) throw ShapeError("image must have 1 or 3 channels, got " + std::to_string(c));
}

constexpr std::string_view kRawMagic = "IDBF1";

std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

// Parses one whitespace-delimited decimal header field of a PNM file,
// skipping '#' comments.
std::size_t pnm_field(const std::vector<unsigned char>& b, std::size_t& pos, const char* name) {
  for (;;) {
    while (pos < b.size() && std::isspace(b[pos])) ++pos;
    if (pos < b.size() && b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  if (pos >= b.size() || !std::isdigit(b[pos]))
    throw FormatError(std::string("PPM header: missing or malformed ") + name);
  std::size_t v = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + static_cast<std::size_t>(b[pos] - '0');
    if (v > (1u << 30)) throw FormatError(std::string("PPM header: ") + name + " out of range");
    ++pos;
  }
  return v;
}

ImageTensor parse_ppm(const std::vector<unsigned char>& b) {
  std::size_t pos = 2;
  const std::size_t width = pnm_field(b, pos, "width");
  const std::size_t height = pnm_field(b, pos, "height");
  const std::size_t maxval = pnm_field(b, pos, "maxval");
  if (width == 0) throw FormatError("PPM header: width must be positive");
  if (height == 0) throw FormatError("PPM header: height must be positive");
  if (maxval != 255) throw FormatError("PPM header: maxval must be 255, got " + std::to_string(maxval));
  if (pos >= b.size() || !std::isspace(b[pos])) throw FormatError("PPM header: missing separator before payload");
  ++pos;
  const std::size_t n = width * height * 3;
  if (b.size() - pos < n)
    throw FormatError("PPM payload truncated: expected " + std::to_string(n) + " bytes, found " +
                      std::to_string(b.size() - pos));
  ImageTensor img(height, width, 3);
  auto data = img.data();
  for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<double>(b[pos + i]) / 255.0;
  return img;
}

ImageTensor parse_raw(const std::vector<unsigned char>& b) {
  const std::size_t header = kRawMagic.size() + 12;
  if (b.size() < header) throw FormatError("IDBF1 header truncated");
  const unsigned char* p = b.data() + kRawMagic.size();
  const std::size_t height = read_u32_le(p);
  const std::size_t width = read_u32_le(p + 4);
  const std::size_t channels = read_u32_le(p + 8);
  if (height == 0) throw FormatError("IDBF1 header: height must be positive");
  if (width == 0) throw FormatError("IDBF1 header: width must be positive");
  if (channels != 1 && channels != 3) throw FormatError("IDBF1 header: channels must be 1 or 3");
  const std::size_t n = height * width * channels;
  if (b.size() - header < n * 4)
    throw FormatError("IDBF1 payload truncated: expected " + std::to_string(n * 4) + " bytes");
  ImageTensor img(height, width, channels);
  auto data = img.data();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bits = read_u32_le(b.data() + header + 4 * i);
    const float f = std::bit_cast<float>(bits);
    if (!std::isfinite(f)) throw FormatError("IDBF1 payload: non-finite sample at index " + std::to_string(i));
    data[i] = static_cast<double>(f);
  }
  return img;
}

}  // namespace

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : height_(height), width_(width), channels_(channels), data_(height * width * channels, fill) {
  check_dims(height, width, channels);
}

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  check_dims(height, width, channels);
  if (data_.size() != height * width * channels)
    throw ShapeError("image data length " + std::to_string(data_.size()) + " does not match " +
                     std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels));
}

void ImageTensor::clamp() {
  for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

ImageTensor ImageTensor::clamped() const {
  ImageTensor out = *this;
  out.clamp();
  return out;
}

bool ImageTensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": shape mismatch " + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + "x" + std::to_string(a.channels()) + " vs " +
                     std::to_string(b.height()) + "x" + std::to_string(b.width()) + "x" +
                     std::to_string(b.channels()));
}

ImageTensor to_grayscale(const ImageTensor& img) {
  if (img.channels() == 1) return img;
  ImageTensor out(img.height(), img.width(), 1);
  const auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < img.pixels(); ++i)
    dst[i] = kLumaR * src[3 * i] + kLumaG * src[3 * i + 1] + kLumaB * src[3 * i + 2];
  return out;
}

Plane luma_plane(const ImageTensor& img) {
  Plane p(static_cast<Eigen::Index>(img.height()), static_cast<Eigen::Index>(img.width()));
  const auto src = img.data();
  double* dst = p.data();
  if (img.channels() == 1) {
    std::copy(src.begin(), src.end(), dst);
  } else {
    for (std::size_t i = 0; i < img.pixels(); ++i)
      dst[i] = kLumaR * src[3 * i] + kLumaG * src[3 * i + 1] + kLumaB * src[3 * i + 2];
  }
  return p;
}

void add_to_all_channels(ImageTensor& img, const Plane& delta) {
  const std::size_t c = img.channels();
  auto data = img.data();
  const double* d = delta.data();
  for (std::size_t i = 0; i < img.pixels(); ++i)
    for (std::size_t k = 0; k < c; ++k) data[i * c + k] += d[i];
}

ImageTensor luma_gradient_to_pixels(const Plane& grad, std::size_t channels) {
  ImageTensor out(static_cast<std::size_t>(grad.rows()), static_cast<std::size_t>(grad.cols()), channels);
  auto dst = out.data();
  const double* g = grad.data();
  const std::size_t n = out.pixels();
  if (channels == 1) {
    std::copy(g, g + n, dst.begin());
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      dst[3 * i] = kLumaR * g[i];
      dst[3 * i + 1] = kLumaG * g[i];
      dst[3 * i + 2] = kLumaB * g[i];
    }
  }
  return out;
}

std::uint8_t quantize_sample(double v) noexcept {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(255.0 * c + 0.5));
}

ImageTensor quantize8(const ImageTensor& img) {
  ImageTensor out = img;
  for (double& v : out.data()) v = static_cast<double>(quantize_sample(v)) / 255.0;
  return out;
}

ByteImage ByteImage::from_tensor(const ImageTensor& img) {
  ByteImage b{img.height(), img.width(), img.channels(), {}};
  b.bytes.resize(img.size());
  const auto src = img.data();
  for (std::size_t i = 0; i < src.size(); ++i) b.bytes[i] = quantize_sample(src[i]);
  return b;
}

ImageTensor ByteImage::tensor() const {
  ImageTensor img(height, width, channels);
  auto dst = img.data();
  for (std::size_t i = 0; i < bytes.size(); ++i) dst[i] = static_cast<double>(bytes[i]) / 255.0;
  return img;
}

ImageTensor load_image(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  try {
    if (bytes.size() >= kRawMagic.size() &&
        std::memcmp(bytes.data(), kRawMagic.data(), kRawMagic.size()) == 0)
      return parse_raw(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return parse_ppm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  throw FormatError(path.string() + ": unrecognized magic (expected P6 or IDBF1)");
}

void save_image(const ImageTensor& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<char> payload(img.pixels() * 3);
  const auto src = img.data();
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      const double v = img.channels() == 3 ? src[3 * i + k] : src[i];
      payload[3 * i + k] = static_cast<char>(quantize_sample(v));
    }
  }
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError(path.string(), "write failed");
}

void save_image_raw(const ImageTensor& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write(kRawMagic.data(), static_cast<std::streamsize>(kRawMagic.size()));
  write_u32_le(out, static_cast<std::uint32_t>(img.height()));
  write_u32_le(out, static_cast<std::uint32_t>(img.width()));
  write_u32_le(out, static_cast<std::uint32_t>(img.channels()));
  for (double v : img.data()) write_u32_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace detbench
