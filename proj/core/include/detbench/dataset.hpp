#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "detbench/image.hpp"
#include "detbench/rng.hpp"

namespace detbench {

enum class ImageClass { Natural, Generated };
enum class DatasetSource { Synthetic, Directory };

std::string_view to_string(DatasetSource source) noexcept;
DatasetSource dataset_source_from_string(std::string_view name);

struct NaturalParams {
  double spectral_slope = 2.0;
  std::size_t blob_count = 6;
  double gradient_amplitude = 0.3;
  friend bool operator==(const NaturalParams&, const NaturalParams&) = default;
};

struct GeneratedParams {
  std::size_t upsample_factor = 2;
  double artifact_amplitude = 0.15;
  double checker_amplitude = 0.004;
  friend bool operator==(const GeneratedParams&, const GeneratedParams&) = default;
};

struct DatasetSpec {
  DatasetSource source = DatasetSource::Synthetic;
  std::filesystem::path directory;
  std::size_t n_images = 2000;
  NaturalParams natural;
  GeneratedParams generated;
  std::size_t image_side = 256;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

// Natural: per-channel 1/f^beta noise with random signs in the DCT domain
// (a shared field plus a per-channel one), a random linear gradient and soft
// Gaussian blobs, rescaled to [0.05, 0.95]. Generated: a natural base blended
// toward its box-downsampled, nearest-upsampled copy, plus a checkerboard at
// 0.5 / upsample_factor cycles per pixel.
ImageTensor synth_image(ImageClass cls, const NaturalParams& natural, const GeneratedParams& generated,
                        std::size_t side, RngStream& rng);

struct LabeledImage {
  ByteImage image;
  int label = 0;  // 1 = AI-generated
  std::size_t index = 0;
};

struct Dataset {
  std::vector<LabeledImage> train;
  std::vector<LabeledImage> test;
};

// Synthetic: index i is generated iff i is odd, drawn from the stream
// (seed, "synth", i). Both modes split each class by the hash of
// (seed, index), train_fraction of each class (rounded) going to train.
Dataset build_dataset(const DatasetSpec& spec, std::size_t workers = 1);

// Writes root/{ai,non-ai}/<index>.ppm for every image in both splits.
void write_dataset(const Dataset& data, const std::filesystem::path& root);

}  // namespace detbench
