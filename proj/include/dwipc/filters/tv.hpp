#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "dwipc/parallel.hpp"
#include "dwipc/volcore/volume.hpp"

namespace dwipc::filters {

/// Fixed dual step of the projection iteration.
inline constexpr double kTvStep = 0.248;

namespace detail {

// Forward differences with a zero difference on the last row/column.
inline void gradient(std::span<const double> u, std::size_t nx, std::size_t ny, std::span<double> gx,
                     std::span<double> gy) {
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x = 0; x < nx; ++x) {
      const std::size_t i = x + nx * y;
      gx[i] = x + 1 < nx ? u[i + 1] - u[i] : 0.0;
      gy[i] = y + 1 < ny ? u[i + nx] - u[i] : 0.0;
    }
}

// Negative adjoint of `gradient`.
inline void divergence(std::span<const double> px, std::span<const double> py, std::size_t nx, std::size_t ny,
                       std::span<double> div) {
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x = 0; x < nx; ++x) {
      const std::size_t i = x + nx * y;
      double d = 0.0;
      if (x + 1 < nx) d += px[i];
      if (x > 0) d -= px[i - 1];
      if (y + 1 < ny) d += py[i];
      if (y > 0) d -= py[i - nx];
      div[i] = d;
    }
}

}  // namespace detail

/// Isotropic discrete total variation of an nx*ny image.
inline double total_variation(std::span<const double> u, std::size_t nx, std::size_t ny) {
  double tv = 0.0;
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x = 0; x < nx; ++x) {
      const std::size_t i = x + nx * y;
      const double gx = x + 1 < nx ? u[i + 1] - u[i] : 0.0;
      const double gy = y + 1 < ny ? u[i + nx] - u[i] : 0.0;
      tv += std::sqrt(gx * gx + gy * gy);
    }
  return tv;
}

/// ROF energy 1/2 |u - f|^2 + lambda TV(u).
inline double rof_objective(std::span<const double> u, std::span<const double> f, std::size_t nx, std::size_t ny,
                            double lambda) {
  double fid = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) fid += 0.5 * (u[i] - f[i]) * (u[i] - f[i]);
  return fid + lambda * total_variation(u, nx, ny);
}

/// Chambolle's dual projection for the ROF model on one 2D image.
/// `on_iterate`, when set, sees the primal iterate after every dual update.
inline std::vector<double> tv_denoise_slice(
    std::span<const double> f, std::size_t nx, std::size_t ny, double lambda, int iters,
    const std::function<void(int, std::span<const double>)>& on_iterate = {}) {
  const std::size_t n = nx * ny;
  std::vector<double> px(n, 0.0), py(n, 0.0), div(n, 0.0), gx(n), gy(n), w(n);
  std::vector<double> u(f.begin(), f.end());
  for (int it = 0; it < iters; ++it) {
    detail::divergence(px, py, nx, ny, div);
    for (std::size_t i = 0; i < n; ++i) w[i] = div[i] - f[i] / lambda;
    detail::gradient(w, nx, ny, gx, gy);
    for (std::size_t i = 0; i < n; ++i) {
      const double norm = std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]);
      const double denom = 1.0 + kTvStep * norm;
      px[i] = (px[i] + kTvStep * gx[i]) / denom;
      py[i] = (py[i] + kTvStep * gy[i]) / denom;
    }
    if (on_iterate) {
      detail::divergence(px, py, nx, ny, div);
      for (std::size_t i = 0; i < n; ++i) u[i] = f[i] - lambda * div[i];
      on_iterate(it, u);
    }
  }
  detail::divergence(px, py, nx, ny, div);
  for (std::size_t i = 0; i < n; ++i) u[i] = f[i] - lambda * div[i];
  return u;
}

/// Slice-wise (axial) TV denoising of a volume.
inline Volume3 tv_denoise(const Volume3& vol, double lambda, int iters, const Exec& exec = {}) {
  if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "tv_denoise: lambda must be > 0");
  if (iters < 1) throw Error(ErrorKind::InvalidArgument, "tv_denoise: iters must be >= 1");
  const auto& d = vol.dims();
  Volume3 out(d, 0.0, vol.voxel_size());
  parallel_for(d.nz, exec, [&](std::size_t z) {
    const auto u = tv_denoise_slice(vol.slice(z), d.nx, d.ny, lambda, iters);
    std::copy(u.begin(), u.end(), out.slice(z).begin());
  });
  return out;
}

}  // namespace dwipc::filters
