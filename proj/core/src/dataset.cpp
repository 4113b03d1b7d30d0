#include "detbench/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "detbench/dct.hpp"
#include "detbench/errors.hpp"
#include "detbench/parallel.hpp"

namespace detbench {

namespace {

const Plane& power_law_amplitude(std::size_t side, double beta) {
  thread_local std::size_t cached_side = 0;
  thread_local double cached_beta = 0.0;
  thread_local Plane amp;
  if (cached_side == side && cached_beta == beta) return amp;
  cached_side = side;
  cached_beta = beta;
  const auto n = static_cast<Eigen::Index>(side);
  amp.resize(n, n);
  for (Eigen::Index u = 0; u < n; ++u)
    for (Eigen::Index v = 0; v < n; ++v) {
      const double f = std::hypot(static_cast<double>(u), static_cast<double>(v));
      amp(u, v) = f == 0.0 ? 0.0 : std::pow(f, -0.5 * beta);
    }
  return amp;
}

Plane power_law_field(const Plane& amplitude, RngStream& rng) {
  Plane coeffs(amplitude.rows(), amplitude.cols());
  for (Eigen::Index u = 0; u < coeffs.rows(); ++u)
    for (Eigen::Index v = 0; v < coeffs.cols(); ++v)
      coeffs(u, v) = u == 0 && v == 0 ? 0.0 : rng.normal() * amplitude(u, v);
  return idct2_full(coeffs);
}

Plane standardized(Plane p) {
  const double mean = p.mean();
  p.array() -= mean;
  const double sd = std::sqrt(p.squaredNorm() / static_cast<double>(p.size()));
  if (sd > 0.0) p /= sd;
  return p;
}

ImageTensor natural_image(const NaturalParams& params, std::size_t side, RngStream& rng) {
  const auto n = static_cast<Eigen::Index>(side);
  const Plane& amplitude = power_law_amplitude(side, params.spectral_slope);
  const Plane shared = standardized(power_law_field(amplitude, rng));
  std::vector<Plane> channels;
  for (int c = 0; c < 3; ++c) {
    Plane own = standardized(power_law_field(amplitude, rng));
    channels.push_back(0.8 * shared + 0.45 * own);
  }
  for (int c = 0; c < 3; ++c) {
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double amp = params.gradient_amplitude * rng.uniform(0.5, 1.5);
    for (Eigen::Index y = 0; y < n; ++y)
      for (Eigen::Index x = 0; x < n; ++x) {
        const double ty = static_cast<double>(y) / static_cast<double>(n) - 0.5;
        const double tx = static_cast<double>(x) / static_cast<double>(n) - 0.5;
        channels[static_cast<std::size_t>(c)](y, x) += 4.0 * amp * (std::cos(angle) * tx + std::sin(angle) * ty);
      }
  }
  for (std::size_t b = 0; b < params.blob_count; ++b) {
    const double cy = rng.uniform(0.0, static_cast<double>(side));
    const double cx = rng.uniform(0.0, static_cast<double>(side));
    const double radius = rng.uniform(static_cast<double>(side) / 32.0, static_cast<double>(side) / 8.0);
    double color[3];
    for (double& col : color) col = rng.uniform(-1.5, 1.5);
    Eigen::VectorXd gy(n), gx(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      gy(k) = std::exp(-0.5 * (static_cast<double>(k) - cy) * (static_cast<double>(k) - cy) / (radius * radius));
      gx(k) = std::exp(-0.5 * (static_cast<double>(k) - cx) * (static_cast<double>(k) - cx) / (radius * radius));
    }
    for (int c = 0; c < 3; ++c) channels[static_cast<std::size_t>(c)] += color[c] * (gy * gx.transpose());
  }
  double lo = channels[0].minCoeff(), hi = channels[0].maxCoeff();
  for (const auto& ch : channels) {
    lo = std::min(lo, ch.minCoeff());
    hi = std::max(hi, ch.maxCoeff());
  }
  const double scale = hi > lo ? 0.9 / (hi - lo) : 0.0;
  ImageTensor img(side, side, 3);
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        img.at(y, x, c) =
            0.05 + scale * (channels[c](static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) - lo);
  return img;
}

ImageTensor generated_image(const ImageTensor& base, const GeneratedParams& params) {
  const std::size_t f = params.upsample_factor;
  const std::size_t h = base.height(), w = base.width(), ch = base.channels();
  ImageTensor out = base;
  for (std::size_t by = 0; by < h; by += f)
    for (std::size_t bx = 0; bx < w; bx += f)
      for (std::size_t c = 0; c < ch; ++c) {
        const std::size_t ey = std::min(by + f, h), ex = std::min(bx + f, w);
        double mean = 0.0;
        for (std::size_t y = by; y < ey; ++y)
          for (std::size_t x = bx; x < ex; ++x) mean += base.at(y, x, c);
        mean /= static_cast<double>((ey - by) * (ex - bx));
        for (std::size_t y = by; y < ey; ++y)
          for (std::size_t x = bx; x < ex; ++x)
            out.at(y, x, c) += params.artifact_amplitude * (mean - base.at(y, x, c));
      }
  const double freq = 0.5 / static_cast<double>(f);
  const double phase = 0.25 * std::numbers::pi;
  for (std::size_t y = 0; y < h; ++y) {
    const double cy = std::cos(2.0 * std::numbers::pi * freq * static_cast<double>(y) + phase);
    for (std::size_t x = 0; x < w; ++x) {
      const double cx = std::cos(2.0 * std::numbers::pi * freq * static_cast<double>(x) + phase);
      for (std::size_t c = 0; c < ch; ++c) out.at(y, x, c) += 2.0 * params.checker_amplitude * cy * cx;
    }
  }
  out.clamp();
  return out;
}

void split_class(const std::vector<LabeledImage>& members, const DatasetSpec& spec, Dataset& out) {
  std::vector<std::pair<std::uint64_t, std::size_t>> order;
  for (std::size_t k = 0; k < members.size(); ++k)
    order.emplace_back(RngStream::derive(spec.seed, {"split", members[k].index}).next_u64(), k);
  std::sort(order.begin(), order.end());
  const auto n_train = static_cast<std::size_t>(std::lround(spec.train_fraction * static_cast<double>(members.size())));
  std::vector<std::size_t> train, test;
  for (std::size_t k = 0; k < order.size(); ++k) (k < n_train ? train : test).push_back(order[k].second);
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  for (auto k : train) out.train.push_back(members[k]);
  for (auto k : test) out.test.push_back(members[k]);
}

void order_by_index(std::vector<LabeledImage>& v) {
  std::sort(v.begin(), v.end(), [](const LabeledImage& a, const LabeledImage& b) { return a.index < b.index; });
}

std::vector<std::filesystem::path> image_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir, "missing class directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

std::string_view to_string(DatasetSource source) noexcept {
  return source == DatasetSource::Synthetic ? "synthetic" : "directory";
}

DatasetSource dataset_source_from_string(std::string_view name) {
  if (name == "synthetic") return DatasetSource::Synthetic;
  if (name == "directory") return DatasetSource::Directory;
  throw FormatError("unknown dataset source '" + std::string(name) + "'");
}

void DatasetSpec::validate() const {
  if (source == DatasetSource::Synthetic) {
    if (n_images < 2) throw ConfigError("dataset: n_images must be at least 2");
    if (image_side < 64) throw ConfigError("dataset: image_side must be at least 64");
    if (natural.spectral_slope < 0.0) throw ConfigError("dataset: spectral_slope must be non-negative");
    if (generated.upsample_factor < 1) throw ConfigError("dataset: upsample_factor must be at least 1");
  } else if (directory.empty()) {
    throw ConfigError("dataset: directory source needs a path");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("dataset: train_fraction must lie in (0, 1)");
}

ImageTensor synth_image(ImageClass cls, const NaturalParams& natural, const GeneratedParams& generated,
                        std::size_t side, RngStream& rng) {
  ImageTensor base = natural_image(natural, side, rng);
  return cls == ImageClass::Natural ? base : generated_image(base, generated);
}

Dataset build_dataset(const DatasetSpec& spec, std::size_t workers) {
  spec.validate();
  std::vector<LabeledImage> natural, generated;
  if (spec.source == DatasetSource::Synthetic) {
    std::vector<LabeledImage> all(spec.n_images);
    parallel_for(spec.n_images, workers, [&](std::size_t i) {
      RngStream rng = RngStream::derive(spec.seed, {"synth", i});
      const ImageClass cls = i % 2 == 1 ? ImageClass::Generated : ImageClass::Natural;
      all[i] = {ByteImage::from_tensor(synth_image(cls, spec.natural, spec.generated, spec.image_side, rng)),
                cls == ImageClass::Generated ? 1 : 0, i};
    });
    for (auto& item : all) (item.label == 1 ? generated : natural).push_back(std::move(item));
  } else {
    std::size_t index = 0;
    for (const auto& [sub, label] : {std::pair{"non-ai", 0}, std::pair{"ai", 1}})
      for (const auto& file : image_files(spec.directory / sub))
        (label == 1 ? generated : natural).push_back({ByteImage::from_tensor(load_image(file)), label, index++});
  }
  if (natural.empty() || generated.empty()) throw ConfigError("dataset: both classes must be present");
  Dataset out;
  split_class(natural, spec, out);
  split_class(generated, spec, out);
  order_by_index(out.train);
  order_by_index(out.test);
  return out;
}

void write_dataset(const Dataset& data, const std::filesystem::path& root) {
  for (const char* sub : {"ai", "non-ai"}) std::filesystem::create_directories(root / sub);
  for (const auto* split : {&data.train, &data.test})
    for (const auto& item : *split) {
      char name[32];
      std::snprintf(name, sizeof name, "%06zu.ppm", item.index);
      save_image(item.image.tensor(), root / (item.label == 1 ? "ai" : "non-ai") / name);
    }
}

}  // namespace detbench
