#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dwipc/parallel.hpp"
#include "dwipc/volcore/volume.hpp"

namespace dwipc::filters {

/// The eight tangent-plane projection distances at (x, y), replicate-padded.
/// Order: two axial half-sums, two diagonal half-sums, four corner triangles.
inline std::array<double, 8> projection_distances(std::span<const double> u, std::size_t nx, std::size_t ny,
                                                  std::size_t x, std::size_t y) {
  const auto at = [&](std::ptrdiff_t i, std::ptrdiff_t j) {
    i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(nx) - 1);
    j = std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(ny) - 1);
    return u[static_cast<std::size_t>(i) + nx * static_cast<std::size_t>(j)];
  };
  const auto i = static_cast<std::ptrdiff_t>(x);
  const auto j = static_cast<std::ptrdiff_t>(y);
  const double c = at(i, j);
  return {
      (at(i - 1, j) + at(i + 1, j)) / 2.0 - c,
      (at(i, j - 1) + at(i, j + 1)) / 2.0 - c,
      (at(i - 1, j - 1) + at(i + 1, j + 1)) / 2.0 - c,
      (at(i - 1, j + 1) + at(i + 1, j - 1)) / 2.0 - c,
      at(i - 1, j) + at(i, j - 1) - at(i - 1, j - 1) - c,
      at(i - 1, j) + at(i, j + 1) - at(i - 1, j + 1) - c,
      at(i + 1, j) + at(i, j - 1) - at(i + 1, j - 1) - c,
      at(i + 1, j) + at(i, j + 1) - at(i + 1, j + 1) - c,
  };
}

/// Smallest-magnitude distance; ties go to the lowest index.
inline double min_abs_distance(const std::array<double, 8>& d) {
  double best = d[0];
  for (std::size_t k = 1; k < d.size(); ++k)
    if (std::abs(d[k]) < std::abs(best)) best = d[k];
  return best;
}

/// In-place Gaussian-curvature filtering of one 2D image. Each sweep visits the
/// four (x mod 2, y mod 2) sub-lattices in turn; no two pixels of a sub-lattice
/// are 8-neighbours, so updates within one are independent.
inline void cf_denoise_slice(std::span<double> u, std::size_t nx, std::size_t ny, int iters) {
  static constexpr std::array<std::array<std::size_t, 2>, 4> kSubsets{{{0, 0}, {1, 1}, {1, 0}, {0, 1}}};
  for (int it = 0; it < iters; ++it)
    for (const auto& [ox, oy] : kSubsets)
      for (std::size_t y = oy; y < ny; y += 2)
        for (std::size_t x = ox; x < nx; x += 2) u[x + nx * y] += min_abs_distance(projection_distances(u, nx, ny, x, y));
}

inline Volume3 cf_denoise(const Volume3& vol, int iters, const Exec& exec = {}) {
  if (iters < 1) throw Error(ErrorKind::InvalidArgument, "cf_denoise: iters must be >= 1");
  const auto& d = vol.dims();
  Volume3 out = vol;
  parallel_for(d.nz, exec, [&](std::size_t z) { cf_denoise_slice(out.slice(z), d.nx, d.ny, iters); });
  return out;
}

}  // namespace dwipc::filters
