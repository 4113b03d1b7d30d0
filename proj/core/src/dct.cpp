#include "detbench/dct.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "detbench/errors.hpp"

namespace detbench {

std::shared_ptr<const Plane> dct_basis(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::shared_ptr<const Plane>> cache;
  if (n == 0) throw ShapeError("DCT of zero-sized input");
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) {
    auto basis = std::make_shared<Plane>(n, n);
    const double nn = static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double a = k == 0 ? std::sqrt(1.0 / nn) : std::sqrt(2.0 / nn);
      for (std::size_t j = 0; j < n; ++j)
        (*basis)(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
            a * std::cos(std::numbers::pi * (2.0 * static_cast<double>(j) + 1.0) * static_cast<double>(k) / (2.0 * nn));
    }
    slot = std::move(basis);
  }
  return slot;
}

Plane dct2_full(const Plane& grid) {
  if (grid.size() == 0) throw ShapeError("DCT of zero-sized input");
  const auto dr = dct_basis(static_cast<std::size_t>(grid.rows()));
  const auto dc = dct_basis(static_cast<std::size_t>(grid.cols()));
  Plane tmp = grid * dc->transpose();
  return *dr * tmp;
}

Plane idct2_full(const Plane& coeffs) {
  if (coeffs.size() == 0) throw ShapeError("inverse DCT of zero-sized input");
  const auto dr = dct_basis(static_cast<std::size_t>(coeffs.rows()));
  const auto dc = dct_basis(static_cast<std::size_t>(coeffs.cols()));
  Plane tmp = coeffs * *dc;
  return dr->transpose() * tmp;
}

Plane pad_to_multiple(const Plane& grid, Eigen::Index block) {
  const Eigen::Index rows = (grid.rows() + block - 1) / block * block;
  const Eigen::Index cols = (grid.cols() + block - 1) / block * block;
  if (rows == grid.rows() && cols == grid.cols()) return grid;
  Plane out(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y) {
    const Eigen::Index sy = std::min(y, grid.rows() - 1);
    for (Eigen::Index x = 0; x < cols; ++x) out(y, x) = grid(sy, std::min(x, grid.cols() - 1));
  }
  return out;
}

Spectrum dct2(const Plane& grid, DctMode mode) {
  if (grid.size() == 0) throw ShapeError("DCT of zero-sized input");
  Spectrum s{{}, grid.rows(), grid.cols(), mode};
  if (mode == DctMode::Full) {
    s.coeffs = dct2_full(grid);
    return s;
  }
  const Plane padded = pad_to_multiple(grid, 8);
  const auto d8 = dct_basis(8);
  const Eigen::Matrix<double, 8, 8, Eigen::RowMajor> d = *d8;
  s.coeffs.resize(padded.rows(), padded.cols());
  for (Eigen::Index by = 0; by < padded.rows(); by += 8)
    for (Eigen::Index bx = 0; bx < padded.cols(); bx += 8)
      s.coeffs.block<8, 8>(by, bx) = d * padded.block<8, 8>(by, bx) * d.transpose();
  return s;
}

Plane idct2(const Spectrum& spectrum) {
  if (spectrum.coeffs.size() == 0) throw ShapeError("inverse DCT of zero-sized input");
  if (spectrum.mode == DctMode::Full) return idct2_full(spectrum.coeffs);
  if (spectrum.coeffs.rows() % 8 != 0 || spectrum.coeffs.cols() % 8 != 0)
    throw ShapeError("block spectrum dimensions must be multiples of 8");
  const auto d8 = dct_basis(8);
  const Eigen::Matrix<double, 8, 8, Eigen::RowMajor> d = *d8;
  Plane padded(spectrum.coeffs.rows(), spectrum.coeffs.cols());
  for (Eigen::Index by = 0; by < padded.rows(); by += 8)
    for (Eigen::Index bx = 0; bx < padded.cols(); bx += 8)
      padded.block<8, 8>(by, bx) = d.transpose() * spectrum.coeffs.block<8, 8>(by, bx) * d;
  return padded.topLeftCorner(spectrum.rows, spectrum.cols);
}

}  // namespace detbench
