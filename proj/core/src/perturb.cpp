#include "detbench/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "detbench/dct.hpp"
#include "detbench/errors.hpp"

namespace detbench {

namespace {

constexpr std::array<int, 64> kLuminanceTable = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

constexpr double kJpegLevelShift = 128.0 / 255.0;

Plane channel_plane(const ImageTensor& img, std::size_t c) {
  Plane p(static_cast<Eigen::Index>(img.height()), static_cast<Eigen::Index>(img.width()));
  const auto src = img.data();
  const std::size_t ch = img.channels();
  double* dst = p.data();
  for (std::size_t i = 0; i < img.pixels(); ++i) dst[i] = src[i * ch + c];
  return p;
}

void store_channel(ImageTensor& img, std::size_t c, const Plane& p) {
  auto dst = img.data();
  const std::size_t ch = img.channels();
  const double* src = p.data();
  for (std::size_t i = 0; i < img.pixels(); ++i) dst[i * ch + c] = src[i];
}

[[noreturn]] void out_of_domain(PerturbationKind kind, const std::string& bound, double value) {
  throw ParameterError(std::string(to_string(kind)) + ": parameter " + std::to_string(value) +
                       " violates " + bound);
}

// Bilinear sample of one channel at a real coordinate, mirrored at the borders.
double sample_bilinear(const ImageTensor& img, double y, double x, std::size_t c) {
  auto reflect = [](double t, double n) {
    const double last = n - 1.0;
    if (last <= 0.0) return 0.0;
    const double period = 2.0 * last;
    t = std::fmod(std::abs(t), period);
    return t > last ? period - t : t;
  };
  y = reflect(y, static_cast<double>(img.height()));
  x = reflect(x, static_cast<double>(img.width()));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
  const std::size_t x1 = std::min(x0 + 1, img.width() - 1);
  const double fy = y - static_cast<double>(y0);
  const double fx = x - static_cast<double>(x0);
  const double top = (1.0 - fx) * img.at(y0, x0, c) + fx * img.at(y0, x1, c);
  const double bottom = (1.0 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c);
  return (1.0 - fy) * top + fy * bottom;
}

}  // namespace

bool is_seen(PerturbationKind kind) noexcept {
  return std::find(kSeenPerturbations.begin(), kSeenPerturbations.end(), kind) != kSeenPerturbations.end();
}

std::string_view to_string(PerturbationKind kind) noexcept {
  switch (kind) {
    case PerturbationKind::JpegCompress: return "jpeg";
    case PerturbationKind::GaussianNoise: return "gauss_noise";
    case PerturbationKind::RayleighNoise: return "rayleigh_noise";
    case PerturbationKind::GaussianBlur: return "gauss_blur";
    case PerturbationKind::Brightness: return "brightness";
    case PerturbationKind::Contrast: return "contrast";
    case PerturbationKind::ElasticBlur: return "elastic";
  }
  return "unknown";
}

PerturbationKind perturbation_from_string(std::string_view name) {
  for (auto kind : kAllPerturbations)
    if (to_string(kind) == name) return kind;
  throw ConfigError("unknown perturbation kind '" + std::string(name) + "'");
}

void PerturbationSpec::validate() const {
  if (!std::isfinite(param)) out_of_domain(kind, "finiteness", param);
  switch (kind) {
    case PerturbationKind::JpegCompress:
      if (param < 1.0 || param > 100.0) out_of_domain(kind, "q in [1, 100]", param);
      break;
    case PerturbationKind::GaussianNoise:
    case PerturbationKind::RayleighNoise:
      if (param < 0.0) out_of_domain(kind, "sigma >= 0", param);
      break;
    case PerturbationKind::GaussianBlur:
      if (param < 0.0) out_of_domain(kind, "radius >= 0", param);
      break;
    case PerturbationKind::Brightness:
      if (param < -1.0 || param > 1.0) out_of_domain(kind, "offset in [-1, 1]", param);
      break;
    case PerturbationKind::Contrast:
      if (param <= 0.0) out_of_domain(kind, "factor > 0", param);
      break;
    case PerturbationKind::ElasticBlur:
      if (param < 0.0) out_of_domain(kind, "alpha >= 0", param);
      break;
  }
}

ImageTensor apply_perturbation(const PerturbationSpec& spec, const ImageTensor& img, RngStream& rng) {
  spec.validate();
  switch (spec.kind) {
    case PerturbationKind::JpegCompress: return jpeg_compress(img, spec.param);
    case PerturbationKind::GaussianNoise: return gaussian_noise(img, spec.param, rng);
    case PerturbationKind::RayleighNoise: return rayleigh_noise(img, spec.param, rng);
    case PerturbationKind::GaussianBlur: return gaussian_blur(img, spec.param);
    case PerturbationKind::Brightness: return adjust_brightness(img, spec.param);
    case PerturbationKind::Contrast: return adjust_contrast(img, spec.param);
    case PerturbationKind::ElasticBlur: return elastic_blur(img, spec.param, rng);
  }
  return img;
}

const std::array<int, 64>& jpeg_base_table() noexcept { return kLuminanceTable; }

std::array<int, 64> jpeg_quant_table(double quality) {
  PerturbationSpec{PerturbationKind::JpegCompress, quality}.validate();
  const double scale = quality < 50.0 ? 5000.0 / quality : 200.0 - 2.0 * quality;
  std::array<int, 64> table{};
  for (std::size_t i = 0; i < 64; ++i) {
    const double q = std::floor((kLuminanceTable[i] * scale + 50.0) / 100.0);
    table[i] = static_cast<int>(std::clamp(q, 1.0, 255.0));
  }
  return table;
}

ImageTensor jpeg_compress(const ImageTensor& img, double quality) {
  const auto table = jpeg_quant_table(quality);
  ImageTensor out(img.height(), img.width(), img.channels());
  for (std::size_t c = 0; c < img.channels(); ++c) {
    Plane plane = channel_plane(img, c).array() - kJpegLevelShift;
    Spectrum s = dct2(plane, DctMode::Block8);
    for (Eigen::Index y = 0; y < s.coeffs.rows(); ++y) {
      for (Eigen::Index x = 0; x < s.coeffs.cols(); ++x) {
        const double step = table[static_cast<std::size_t>((y % 8) * 8 + x % 8)] / 255.0;
        s.coeffs(y, x) = std::round(s.coeffs(y, x) / step) * step;
      }
    }
    store_channel(out, c, idct2(s).array() + kJpegLevelShift);
  }
  out.clamp();
  return out;
}

ImageTensor gaussian_noise(const ImageTensor& img, double sigma, RngStream& rng) {
  PerturbationSpec{PerturbationKind::GaussianNoise, sigma}.validate();
  ImageTensor out = img;
  if (sigma == 0.0) return out;
  std::vector<double> noise(out.data().size());
  rng.fill_normal(noise.data(), noise.size(), sigma);
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += noise[i];
  out.clamp();
  return out;
}

ImageTensor rayleigh_noise(const ImageTensor& img, double sigma, RngStream& rng) {
  PerturbationSpec{PerturbationKind::RayleighNoise, sigma}.validate();
  ImageTensor out = img;
  if (sigma == 0.0) return out;
  const double mean = sigma * std::sqrt(std::numbers::pi / 2.0);
  for (double& v : out.data()) v += rng.rayleigh(sigma) - mean;
  out.clamp();
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) return {1.0};
  const auto half = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * half + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -half; i <= half; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + half)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

std::ptrdiff_t mirror_index(std::ptrdiff_t i, std::ptrdiff_t n) noexcept {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

Plane convolve_separable(const Plane& plane, const std::vector<double>& kernel) {
  const auto half = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  const std::ptrdiff_t rows = plane.rows();
  const std::ptrdiff_t cols = plane.cols();
  Plane tmp(rows, cols);
  std::vector<double> line;
  for (std::ptrdiff_t y = 0; y < rows; ++y) {
    line.resize(static_cast<std::size_t>(cols + 2 * half));
    for (std::ptrdiff_t x = -half; x < cols + half; ++x)
      line[static_cast<std::size_t>(x + half)] = plane(y, mirror_index(x, cols));
    for (std::ptrdiff_t x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kernel.size(); ++k) acc += kernel[k] * line[static_cast<std::size_t>(x) + k];
      tmp(y, x) = acc;
    }
  }
  Plane out(rows, cols);
  for (std::ptrdiff_t x = 0; x < cols; ++x) {
    line.resize(static_cast<std::size_t>(rows + 2 * half));
    for (std::ptrdiff_t y = -half; y < rows + half; ++y)
      line[static_cast<std::size_t>(y + half)] = tmp(mirror_index(y, rows), x);
    for (std::ptrdiff_t y = 0; y < rows; ++y) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kernel.size(); ++k) acc += kernel[k] * line[static_cast<std::size_t>(y) + k];
      out(y, x) = acc;
    }
  }
  return out;
}

ImageTensor gaussian_blur(const ImageTensor& img, double radius) {
  PerturbationSpec{PerturbationKind::GaussianBlur, radius}.validate();
  if (radius == 0.0) return img;
  const auto kernel = gaussian_kernel(radius);
  ImageTensor out(img.height(), img.width(), img.channels());
  for (std::size_t c = 0; c < img.channels(); ++c) store_channel(out, c, convolve_separable(channel_plane(img, c), kernel));
  out.clamp();
  return out;
}

ImageTensor adjust_brightness(const ImageTensor& img, double offset) {
  PerturbationSpec{PerturbationKind::Brightness, offset}.validate();
  ImageTensor out = img;
  if (offset == 0.0) return out;
  for (double& v : out.data()) v += offset;
  out.clamp();
  return out;
}

ImageTensor adjust_contrast(const ImageTensor& img, double factor) {
  PerturbationSpec{PerturbationKind::Contrast, factor}.validate();
  if (factor == 1.0) return img;
  const std::size_t ch = img.channels();
  std::vector<double> mean(ch, 0.0);
  const auto src = img.data();
  for (std::size_t i = 0; i < img.pixels(); ++i)
    for (std::size_t c = 0; c < ch; ++c) mean[c] += src[i * ch + c];
  for (double& m : mean) m /= static_cast<double>(img.pixels());
  ImageTensor out = img;
  auto dst = out.data();
  for (std::size_t i = 0; i < img.pixels(); ++i)
    for (std::size_t c = 0; c < ch; ++c) dst[i * ch + c] = mean[c] + factor * (src[i * ch + c] - mean[c]);
  out.clamp();
  return out;
}

ImageTensor elastic_blur(const ImageTensor& img, double alpha, RngStream& rng) {
  PerturbationSpec{PerturbationKind::ElasticBlur, alpha}.validate();
  if (alpha == 0.0) return img;
  const auto rows = static_cast<Eigen::Index>(img.height());
  const auto cols = static_cast<Eigen::Index>(img.width());
  const auto kernel = gaussian_kernel(kElasticSmoothing);
  std::array<Plane, 2> field;
  for (auto& f : field) {
    Plane raw(rows, cols);
    for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = rng.uniform(-1.0, 1.0);
    f = convolve_separable(raw, kernel);
    // The smoothed field is tiny; rescale so that alpha is the peak
    // displacement in pixels.
    const double peak = f.cwiseAbs().maxCoeff();
    if (peak > 0.0) f *= alpha / peak;
  }
  ImageTensor out(img.height(), img.width(), img.channels());
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      const double sy = static_cast<double>(y) + field[0](y, x);
      const double sx = static_cast<double>(x) + field[1](y, x);
      for (std::size_t c = 0; c < img.channels(); ++c)
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = sample_bilinear(img, sy, sx, c);
    }
  }
  out.clamp();
  return out;
}

void SeenPerturbationRanges::validate() const {
  if (ranges.size() != kSeenPerturbations.size())
    throw ConfigError("perturbation ranges must cover exactly the five seen kinds");
  for (auto kind : kSeenPerturbations) {
    const auto it = ranges.find(kind);
    if (it == ranges.end()) throw ConfigError("perturbation ranges missing kind '" + std::string(to_string(kind)) + "'");
    const auto [lo, hi] = it->second;
    if (!(lo <= hi)) throw ConfigError("empty range for '" + std::string(to_string(kind)) + "'");
    try {
      PerturbationSpec{kind, lo}.validate();
      PerturbationSpec{kind, hi}.validate();
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("perturbation range outside domain: ") + e.what());
    }
  }
}

std::vector<PerturbationSpec> SeenPerturbationRanges::strongest() const {
  std::vector<PerturbationSpec> out;
  for (const auto& [kind, range] : ranges) {
    const auto [lo, hi] = range;
    switch (kind) {
      case PerturbationKind::JpegCompress: out.push_back({kind, lo}); break;
      case PerturbationKind::Brightness:
        if (lo != 0.0) out.push_back({kind, lo});
        if (hi != 0.0 && hi != lo) out.push_back({kind, hi});
        break;
      case PerturbationKind::Contrast:
        if (lo != 1.0) out.push_back({kind, lo});
        if (hi != 1.0 && hi != lo) out.push_back({kind, hi});
        break;
      default: out.push_back({kind, hi}); break;
    }
  }
  return out;
}

SeenPerturbationRanges SeenPerturbationRanges::defaults() {
  SeenPerturbationRanges r;
  r.ranges = {
      {PerturbationKind::JpegCompress, {40.0, 100.0}},
      {PerturbationKind::GaussianNoise, {0.0, 0.1}},
      {PerturbationKind::GaussianBlur, {0.0, 1.0}},
      {PerturbationKind::Brightness, {-0.1, 0.1}},
      {PerturbationKind::Contrast, {0.8, 1.2}},
  };
  return r;
}

PerturbationSpec sample_seen_perturbation(RngStream& rng, const SeenPerturbationRanges& ranges) {
  if (ranges.empty()) throw ConfigError("no perturbation ranges configured");
  ranges.validate();
  const PerturbationKind kind = kSeenPerturbations[rng.below(kSeenPerturbations.size())];
  const auto [lo, hi] = ranges.ranges.at(kind);
  return {kind, rng.uniform(lo, hi)};
}

}  // namespace detbench
