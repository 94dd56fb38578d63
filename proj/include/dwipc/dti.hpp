#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "dwipc/parallel.hpp"
#include "dwipc/volcore/series.hpp"
#include "dwipc/volcore/volume.hpp"

namespace dwipc::dti {

/// Symmetric 3x3 tensor, mm^2/s.
struct Tensor6 {
  double xx = 0, yy = 0, zz = 0, xy = 0, xz = 0, yz = 0;

  double trace() const noexcept { return xx + yy + zz; }
  double frobenius() const noexcept {
    return std::sqrt(xx * xx + yy * yy + zz * zz + 2.0 * (xy * xy + xz * xz + yz * yz));
  }
  /// g^T D g
  double quadratic(const Vec3& g) const noexcept {
    return xx * g[0] * g[0] + yy * g[1] * g[1] + zz * g[2] * g[2] +
           2.0 * (xy * g[0] * g[1] + xz * g[0] * g[2] + yz * g[1] * g[2]);
  }
};

/// lambda1 * e e^T + lambda2 * f f^T + lambda3 * h h^T for an orthonormal frame built around `e`.
inline Tensor6 tensor_from_eigen(const Vec3& eigenvalues, Vec3 e) {
  const double n = std::sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2]);
  if (!(n > 0.0)) throw Error(ErrorKind::InvalidArgument, "tensor direction must be nonzero");
  for (auto& c : e) c /= n;
  // Helper axis least aligned with e.
  std::size_t k = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (std::abs(e[i]) < std::abs(e[k])) k = i;
  Vec3 a{0, 0, 0};
  a[k] = 1.0;
  Vec3 f{a[0] - e[k] * e[0], a[1] - e[k] * e[1], a[2] - e[k] * e[2]};
  const double fn = std::sqrt(f[0] * f[0] + f[1] * f[1] + f[2] * f[2]);
  for (auto& c : f) c /= fn;
  const Vec3 h{e[1] * f[2] - e[2] * f[1], e[2] * f[0] - e[0] * f[2], e[0] * f[1] - e[1] * f[0]};
  Tensor6 t;
  const auto add = [&](double l, const Vec3& v) {
    t.xx += l * v[0] * v[0];
    t.yy += l * v[1] * v[1];
    t.zz += l * v[2] * v[2];
    t.xy += l * v[0] * v[1];
    t.xz += l * v[0] * v[2];
    t.yz += l * v[1] * v[2];
  };
  add(eigenvalues[0], e);
  add(eigenvalues[1], f);
  add(eigenvalues[2], h);
  return t;
}

/// Eigenvalues of a symmetric 3x3 matrix, descending, by the trigonometric
/// closed form (Smith 1961).
inline std::array<double, 3> eig3_sym(const Tensor6& t) {
  const double p1 = t.xy * t.xy + t.xz * t.xz + t.yz * t.yz;
  if (p1 == 0.0) {
    std::array<double, 3> d{t.xx, t.yy, t.zz};
    std::sort(d.begin(), d.end(), std::greater<>());
    return d;
  }
  const double q = t.trace() / 3.0;
  const double a = t.xx - q, b = t.yy - q, c = t.zz - q;
  const double p2 = a * a + b * b + c * c + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  // det((A - qI) / p) / 2
  const double det = a * (b * c - t.yz * t.yz) - t.xy * (t.xy * c - t.yz * t.xz) + t.xz * (t.xy * t.yz - b * t.xz);
  const double r = std::clamp(det / (2.0 * p * p * p), -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double l1 = q + 2.0 * p * std::cos(phi);
  const double l3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  const double l2 = 3.0 * q - l1 - l3;
  return {l1, l2, l3};
}

/// Fractional anisotropy, clamped to [0, 1]; 0 when all eigenvalues vanish.
inline double fa(double l1, double l2, double l3) {
  const double denom = l1 * l1 + l2 * l2 + l3 * l3;
  if (denom == 0.0) return 0.0;
  const double mean = (l1 + l2 + l3) / 3.0;
  const double dev = (l1 - mean) * (l1 - mean) + (l2 - mean) * (l2 - mean) + (l3 - mean) * (l3 - mean);
  return std::clamp(std::sqrt(1.5 * dev / denom), 0.0, 1.0);
}

inline double fa(const Tensor6& t) {
  const auto l = eig3_sym(t);
  return fa(l[0], l[1], l[2]);
}

/// Per-voxel tensors and baseline signal.
/// S0 is kept linear rather than as ln(S0) so zero-signal voxels stay finite.
struct TensorField {
  std::array<Volume3, 6> d;  // xx, yy, zz, xy, xz, yz
  Volume3 s0;

  TensorField() = default;
  explicit TensorField(Dims dims, VoxelSize vs = {1.0, 1.0, 1.0}) : s0(dims, 0.0, vs) {
    for (auto& c : d) c = Volume3(dims, 0.0, vs);
  }

  const Dims& dims() const noexcept { return s0.dims(); }

  Tensor6 at(std::size_t i) const noexcept { return {d[0][i], d[1][i], d[2][i], d[3][i], d[4][i], d[5][i]}; }
  void set(std::size_t i, const Tensor6& t) noexcept {
    d[0][i] = t.xx;
    d[1][i] = t.yy;
    d[2][i] = t.zz;
    d[3][i] = t.xy;
    d[4][i] = t.xz;
    d[5][i] = t.yz;
  }
};

struct FitResult {
  TensorField tensors;
  Mask clamped_qc;  // voxels where more than half of the samples hit the signal floor
};

/// Rows [1, -b gx^2, -b gy^2, -b gz^2, -2b gx gy, -2b gx gz, -2b gy gz].
inline Eigen::MatrixXd design_matrix(const GradientTable& grads) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(grads.size()), 7);
  for (std::size_t k = 0; k < grads.size(); ++k) {
    const auto& [b, g] = grads[k];
    const auto r = static_cast<Eigen::Index>(k);
    a(r, 0) = 1.0;
    a(r, 1) = -b * g[0] * g[0];
    a(r, 2) = -b * g[1] * g[1];
    a(r, 3) = -b * g[2] * g[2];
    a(r, 4) = -2.0 * b * g[0] * g[1];
    a(r, 5) = -2.0 * b * g[0] * g[2];
    a(r, 6) = -2.0 * b * g[1] * g[2];
  }
  return a;
}

/// Log-linear ordinary least squares inside `mask`. Samples are floored at
/// 1e-6 * max(b=0 signal in mask) before the log.
inline FitResult fit_tensor(const MagnitudeSeries& series, const Mask& mask, const Exec& exec = {}) {
  series.validate();
  const auto& grads = series.gradients;
  if (series.size() < 7) throw Error(ErrorKind::Configuration, "fit_tensor: need at least 7 volumes");
  if (grads.count_b0() == 0) throw Error(ErrorKind::Configuration, "fit_tensor: no b=0 volume");
  if (grads.count_b0() == grads.size()) throw Error(ErrorKind::Configuration, "fit_tensor: no diffusion-weighted volume");
  require_same_dims(series.volumes.front(), mask, "fit_tensor mask");

  const Eigen::MatrixXd a = design_matrix(grads);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < 7) throw Error(ErrorKind::Configuration, "fit_tensor: degenerate gradient scheme (rank " +
                                                                std::to_string(qr.rank()) + " < 7)");
  const Eigen::MatrixXd pinv = qr.solve(Eigen::MatrixXd::Identity(a.rows(), a.rows()));

  const Dims dims = series.dims();
  double max_s0 = 0.0;
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (grads[k].b != 0.0) continue;
    for (std::size_t i = 0; i < dims.voxels(); ++i)
      if (mask[i]) max_s0 = std::max(max_s0, series.volumes[k][i]);
  }
  const double floor = max_s0 > 0.0 ? 1e-6 * max_s0 : std::numeric_limits<double>::min();

  FitResult out{TensorField(dims, series.volumes.front().voxel_size()), Mask(dims, 0, mask.voxel_size())};
  const std::size_t n = series.size();
  parallel_for(dims.nz, exec, [&](std::size_t z) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = z * dims.slice_voxels(); i < (z + 1) * dims.slice_voxels(); ++i) {
      if (!mask[i]) continue;
      std::size_t clamped = 0;
      for (std::size_t k = 0; k < n; ++k) {
        double s = series.volumes[k][i];
        if (!(s > floor)) {
          s = floor;
          ++clamped;
        }
        y(static_cast<Eigen::Index>(k)) = std::log(s);
      }
      const Eigen::VectorXd x = pinv * y;
      out.tensors.s0[i] = std::exp(x(0));
      out.tensors.set(i, {x(1), x(2), x(3), x(4), x(5), x(6)});
      out.clamped_qc[i] = 2 * clamped > n;
    }
  });
  return out;
}

inline Volume3 fa_map(const TensorField& tensors, const Mask& mask) {
  require_same_dims(tensors.s0, mask, "fa_map");
  Volume3 out(tensors.dims(), 0.0, tensors.s0.voxel_size());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (mask[i]) out[i] = fa(tensors.at(i));
  return out;
}

}  // namespace dwipc::dti
