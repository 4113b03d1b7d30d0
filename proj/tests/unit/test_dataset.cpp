#include <cmath>
#include <filesystem>
#include <vector>

#include <gtest/gtest.h>

#include "detbench/dataset.hpp"
#include "detbench/dct.hpp"
#include "detbench/errors.hpp"

using namespace detbench;

namespace {

Plane channel0(const ImageTensor& img) {
  Plane p(static_cast<Eigen::Index>(img.height()), static_cast<Eigen::Index>(img.width()));
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x)
      p(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) = img.at(y, x, 0);
  return p;
}

// Least-squares slope of log power against log radial frequency.
double spectral_slope(double beta, std::size_t side, int images) {
  NaturalParams np;
  np.spectral_slope = beta;
  np.blob_count = 0;
  np.gradient_amplitude = 0.0;
  const auto n = static_cast<Eigen::Index>(side);
  std::vector<double> power(side, 0.0), count(side, 0.0);
  for (int i = 0; i < images; ++i) {
    RngStream rng = RngStream::derive(static_cast<std::uint64_t>(i), {"slope"});
    const Plane c = dct2_full(channel0(synth_image(ImageClass::Natural, np, {}, side, rng)));
    for (Eigen::Index u = 0; u < n; ++u)
      for (Eigen::Index v = 0; v < n; ++v) {
        const auto f = static_cast<std::size_t>(std::lround(std::hypot(double(u), double(v))));
        if (f < side) {
          power[f] += c(u, v) * c(u, v);
          count[f] += 1;
        }
      }
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
  for (std::size_t f = 4; f <= side / 2; ++f) {
    const double lx = std::log(double(f)), ly = std::log(power[f] / count[f]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    m += 1;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace

TEST(Dataset, SpecValidation) {
  DatasetSpec s;
  EXPECT_NO_THROW(s.validate());
  s.n_images = 1;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.train_fraction = 1.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.image_side = 32;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.source = DatasetSource::Directory;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_EQ(dataset_source_from_string("directory"), DatasetSource::Directory);
  EXPECT_THROW(dataset_source_from_string("web"), FormatError);
}

TEST(Dataset, ClassesAndSplit) {
  DatasetSpec s;
  s.n_images = 51;
  s.image_side = 64;
  s.train_fraction = 0.7;
  s.seed = 3;
  const Dataset d = build_dataset(s);
  EXPECT_EQ(d.train.size() + d.test.size(), 51u);
  std::size_t train_pos = 0, train_neg = 0;
  std::vector<bool> seen(51, false);
  for (const auto* split : {&d.train, &d.test})
    for (std::size_t k = 0; k < split->size(); ++k) {
      const LabeledImage& item = (*split)[k];
      EXPECT_EQ(item.label, static_cast<int>(item.index % 2));
      EXPECT_FALSE(seen[item.index]);
      seen[item.index] = true;
      if (k > 0) { EXPECT_LT((*split)[k - 1].index, item.index); }
      if (split == &d.train) (item.label ? train_pos : train_neg)++;
    }
  // 25 generated, 26 natural.
  EXPECT_EQ(train_pos, static_cast<std::size_t>(std::lround(0.7 * 25)));
  EXPECT_EQ(train_neg, static_cast<std::size_t>(std::lround(0.7 * 26)));
}

TEST(Dataset, DeterministicAcrossWorkers) {
  DatasetSpec s;
  s.n_images = 12;
  s.image_side = 64;
  s.seed = 4;
  const Dataset a = build_dataset(s, 1), b = build_dataset(s, 3);
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t k = 0; k < a.train.size(); ++k) {
    EXPECT_EQ(a.train[k].index, b.train[k].index);
    EXPECT_EQ(a.train[k].image.bytes, b.train[k].image.bytes);
  }
  s.seed = 5;
  EXPECT_NE(build_dataset(s).train[0].image.bytes, a.train[0].image.bytes);
}

TEST(Dataset, NaturalImagesFollowPowerLaw) {
  for (double beta : {1.4, 2.0, 2.6}) EXPECT_NEAR(spectral_slope(beta, 128, 8), -beta, 0.15) << beta;
}

TEST(Dataset, GeneratedImagesCarryCheckerPeak) {
  // Energy at the checker frequency (DCT index side / 2 for factor 2).
  const std::size_t side = 128;
  double nat = 0, gen = 0;
  for (std::uint64_t i = 0; i < 6; ++i) {
    for (ImageClass cls : {ImageClass::Natural, ImageClass::Generated}) {
      RngStream rng = RngStream::derive(i, {"checker"});
      const Plane c = dct2_full(channel0(synth_image(cls, {}, {}, side, rng)));
      const double e = c(side / 2, side / 2) * c(side / 2, side / 2);
      (cls == ImageClass::Natural ? nat : gen) += e;
    }
  }
  EXPECT_GT(gen, 20 * nat);
}

TEST(Dataset, RangeAndShape) {
  RngStream rng = RngStream::derive(6, {"range"});
  for (ImageClass cls : {ImageClass::Natural, ImageClass::Generated}) {
    const ImageTensor img = synth_image(cls, {}, {}, 96, rng);
    EXPECT_EQ(img.height(), 96u);
    EXPECT_EQ(img.channels(), 3u);
    for (double v : img.data()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
}

TEST(Dataset, DirectoryRoundTrip) {
  DatasetSpec s;
  s.n_images = 10;
  s.image_side = 64;
  s.seed = 7;
  const Dataset d = build_dataset(s);
  const auto root = std::filesystem::temp_directory_path() / "detbench_dataset_rt";
  std::filesystem::remove_all(root);
  write_dataset(d, root);
  DatasetSpec dir;
  dir.source = DatasetSource::Directory;
  dir.directory = root;
  dir.seed = 7;
  const Dataset back = build_dataset(dir);
  EXPECT_EQ(back.train.size() + back.test.size(), 10u);
  std::size_t positives = 0;
  for (const auto* split : {&back.train, &back.test})
    for (const auto& item : *split) positives += item.label;
  EXPECT_EQ(positives, 5u);
  std::filesystem::remove_all(root);
  EXPECT_THROW(build_dataset(dir), IoError);
}
