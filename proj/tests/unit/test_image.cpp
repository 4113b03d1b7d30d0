#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "detbench/errors.hpp"
#include "detbench/image.hpp"
#include "detbench/rng.hpp"

using namespace detbench;
namespace fs = std::filesystem;

namespace {

ImageTensor random_image(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
  RngStream rng = RngStream::derive(seed, {"img"});
  ImageTensor img(h, w, c);
  for (double& v : img.data()) v = rng.uniform();
  return img;
}

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "detbench_test_image";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

}  // namespace

TEST(Image, ShapeChecks) {
  EXPECT_THROW(ImageTensor(0, 4, 3), ShapeError);
  EXPECT_THROW(ImageTensor(4, 4, 2), ShapeError);
  EXPECT_THROW(ImageTensor(2, 2, 3, std::vector<double>(11)), ShapeError);
  EXPECT_THROW(require_same_shape(ImageTensor(2, 2, 3), ImageTensor(2, 3, 3), "t"), ShapeError);
}

TEST(Image, GrayscaleWeights) {
  ImageTensor img(1, 1, 3);
  img.at(0, 0, 0) = 1.0;
  EXPECT_DOUBLE_EQ(to_grayscale(img)[0], 0.299);
  img.at(0, 0, 0) = 0.0;
  img.at(0, 0, 1) = 1.0;
  EXPECT_DOUBLE_EQ(to_grayscale(img)[0], 0.587);
  img.at(0, 0, 1) = 0.0;
  img.at(0, 0, 2) = 1.0;
  EXPECT_DOUBLE_EQ(to_grayscale(img)[0], 0.114);
  const ImageTensor gray = random_image(3, 4, 1, 1);
  EXPECT_EQ(to_grayscale(gray), gray);
}

TEST(Image, LumaGradientIsAdjointOfLuma) {
  // <L(x), g> = <x, L^T g> for the linear luma map L.
  const ImageTensor x = random_image(5, 7, 3, 2);
  Plane g(5, 7);
  RngStream rng = RngStream::derive(3, {"g"});
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
  const double lhs = (luma_plane(x).array() * g.array()).sum();
  const ImageTensor back = luma_gradient_to_pixels(g, 3);
  double rhs = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Image, Quantization) {
  EXPECT_EQ(quantize_sample(-0.5), 0);
  EXPECT_EQ(quantize_sample(2.0), 255);
  EXPECT_EQ(quantize_sample(0.5), 128);
  EXPECT_EQ(quantize_sample(127.4 / 255.0), 127);
  const ImageTensor q = quantize8(random_image(4, 4, 3, 4));
  EXPECT_EQ(quantize8(q), q);
}

TEST(Image, PpmRoundTripIsQuantization) {
  const ImageTensor img = random_image(9, 11, 3, 5);
  const fs::path p = temp_file("rt.ppm");
  save_image(img, p);
  EXPECT_EQ(load_image(p), quantize8(img));
}

TEST(Image, GrayPpmIsReplicated) {
  const ImageTensor img = random_image(3, 3, 1, 6);
  const fs::path p = temp_file("gray.ppm");
  save_image(img, p);
  const ImageTensor back = load_image(p);
  ASSERT_EQ(back.channels(), 3u);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(back.at(1, 2, c), quantize8(img).at(1, 2, 0));
}

TEST(Image, RawRoundTripIsFloatExact) {
  const ImageTensor img = random_image(6, 5, 3, 7);
  const fs::path p = temp_file("rt.idbf");
  save_image_raw(img, p);
  const ImageTensor back = load_image(p);
  ASSERT_TRUE(back.same_shape(img));
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(back[i], static_cast<double>(static_cast<float>(img[i])));
}

TEST(Image, MalformedFilesAreRejected) {
  const fs::path p = temp_file("bad.ppm");
  write_bytes(p, "P6\n2 2\n255\n\x01\x02");
  EXPECT_THROW(load_image(p), FormatError);
  write_bytes(p, "P6\n2 2\n65535\n");
  EXPECT_THROW(load_image(p), FormatError);
  write_bytes(p, "P6\n0 2\n255\n");
  EXPECT_THROW(load_image(p), FormatError);
  write_bytes(p, "GIF89a");
  EXPECT_THROW(load_image(p), FormatError);
  write_bytes(p, "IDBF1\x01");
  EXPECT_THROW(load_image(p), FormatError);
  EXPECT_THROW(load_image(temp_file("does-not-exist.ppm")), IoError);
}

TEST(Image, PpmHeaderComments) {
  const fs::path p = temp_file("comment.ppm");
  write_bytes(p, std::string("P6 # c\n1 1\n255\n") + std::string("\xff\x00\x80", 3));
  const ImageTensor img = load_image(p);
  EXPECT_DOUBLE_EQ(img.at(0, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(img.at(0, 0, 1), 0.0);
  EXPECT_DOUBLE_EQ(img.at(0, 0, 2), 128.0 / 255.0);
}

TEST(Image, ByteImageRoundTrip) {
  const ImageTensor img = random_image(4, 6, 3, 8);
  EXPECT_EQ(ByteImage::from_tensor(img).tensor(), quantize8(img));
}
