#pragma once

#include <cstddef>
#include <memory>

#include "detbench/image.hpp"

namespace detbench {

enum class DctMode { Full, Block8 };

// Coefficients plus the geometry needed to invert them. In Block8 mode the
// coefficient grid covers the edge-replicated padding; `rows`/`cols` are the
// original dimensions restored by idct2.
struct Spectrum {
  Plane coeffs;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  DctMode mode = DctMode::Full;
};

// Orthonormal DCT-II basis, D(k, n) = a_k cos(pi (2n + 1) k / 2N). Cached and
// shared between threads.
std::shared_ptr<const Plane> dct_basis(std::size_t n);

Spectrum dct2(const Plane& grid, DctMode mode = DctMode::Full);
Plane idct2(const Spectrum& spectrum);

// Whole-image orthonormal transform pair without the Spectrum wrapper.
Plane dct2_full(const Plane& grid);
Plane idct2_full(const Plane& coeffs);

// Edge-replicating pad to a multiple of `block` in both directions.
Plane pad_to_multiple(const Plane& grid, Eigen::Index block);

}  // namespace detbench
