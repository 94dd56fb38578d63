#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "dwipc/filters/config.hpp"
#include "dwipc/parallel.hpp"
#include "dwipc/volcore/volume.hpp"

namespace dwipc::filters {

struct MpThreshold {
  std::size_t rank = 0;  // retained signal components
  double sigma2 = 0.0;   // noise variance estimate
};

/// Marchenko-Pastur cut on a descending spectrum of the Casorati covariance
/// (eigenvalues of X^T X / Q, R = min(M, N) of them, Q = max(M, N)).
/// Returns the smallest rank p whose tail fits the MP bulk:
///   lambda_{p+1} - lambda_R < 4 sigma^2 sqrt((R - p) / Q),  sigma^2 = mean of the tail.
/// No fitting tail means the block is kept at full rank with sigma = 0.
inline MpThreshold mp_threshold(std::span<const double> eig_desc, std::size_t q) {
  const std::size_t r = eig_desc.size();
  std::vector<double> tail_sum(r + 1, 0.0);
  for (std::size_t i = r; i-- > 0;) tail_sum[i] = tail_sum[i + 1] + std::max(eig_desc[i], 0.0);
  const double smallest = std::max(eig_desc[r - 1], 0.0);
  for (std::size_t p = 0; p < r; ++p) {
    const double sigma2 = tail_sum[p] / static_cast<double>(r - p);
    const double spread = std::max(eig_desc[p], 0.0) - smallest;
    const double bound = 4.0 * sigma2 * std::sqrt(static_cast<double>(r - p) / static_cast<double>(q));
    if (spread < bound) return {p, sigma2};
  }
  return {r, 0.0};
}

struct BlockResult {
  Eigen::MatrixXd recon;  // M x N
  std::size_t rank = 0;
  double sigma = 0.0;
};

/// Denoises one M x N Casorati matrix (rows are voxels, columns volumes).
/// `forced_rank` bypasses the MP cut.
inline BlockResult denoise_block(const Eigen::MatrixXd& x, std::optional<std::size_t> forced_rank = std::nullopt) {
  const auto m = static_cast<std::size_t>(x.rows());
  const auto n = static_cast<std::size_t>(x.cols());
  const std::size_t q = std::max(m, n);
  const bool wide = m < n;
  const Eigen::MatrixXd cov = wide ? Eigen::MatrixXd(x * x.transpose()) : Eigen::MatrixXd(x.transpose() * x);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov / static_cast<double>(q));
  // Eigen sorts ascending; flip to descending.
  const Eigen::VectorXd vals = es.eigenvalues().reverse();
  const Eigen::MatrixXd vecs = es.eigenvectors().rowwise().reverse();
  std::vector<double> spectrum(vals.data(), vals.data() + vals.size());
  auto cut = mp_threshold(spectrum, q);
  if (forced_rank) cut.rank = std::min(*forced_rank, spectrum.size());
  const auto p = static_cast<Eigen::Index>(cut.rank);
  BlockResult out;
  out.rank = cut.rank;
  out.sigma = std::sqrt(cut.sigma2);
  const Eigen::MatrixXd basis = vecs.leftCols(p);
  out.recon = wide ? Eigen::MatrixXd(basis * (basis.transpose() * x)) : Eigen::MatrixXd((x * basis) * basis.transpose());
  return out;
}

struct MppcaResult {
  std::vector<Volume3> volumes;
  Volume3 sigma;               // noise std, averaged over covering blocks
  std::vector<std::size_t> ranks;  // retained rank per block position, in visiting order
};

namespace detail {

// Window starts along one axis: centres at 0, stride, ..., always including the last voxel,
// with windows shifted to stay inside [0, n).
inline std::vector<std::size_t> window_starts(std::size_t n, std::size_t block, std::size_t stride) {
  std::vector<std::size_t> starts;
  const std::size_t half = block / 2;
  auto start_for = [&](std::size_t c) { return std::min(c > half ? c - half : 0, n - block); };
  for (std::size_t c = 0; c < n; c += stride) starts.push_back(start_for(c));
  if ((n - 1) % stride != 0) starts.push_back(start_for(n - 1));
  return starts;
}

}  // namespace detail

/// Sliding-window MPPCA over a series of real volumes. Overlapping
/// reconstructions are averaged per voxel.
inline MppcaResult mppca_denoise(const std::vector<Volume3>& series, const MppcaConfig& cfg, const Exec& exec = {},
                                 std::optional<std::size_t> forced_rank = std::nullopt) {
  validate(cfg);
  if (series.size() < 2) throw Error(ErrorKind::InvalidArgument, "mppca_denoise: need at least 2 volumes");
  const Dims d = series.front().dims();
  for (const auto& v : series) require_same_dims(v, series.front(), "mppca_denoise");
  const auto [bx, by, bz] = cfg.block;
  if (bx > d.nx || by > d.ny || bz > d.nz)
    throw Error(ErrorKind::InvalidArgument, "mppca_denoise: block larger than volume " + to_string(d));

  const auto xs = detail::window_starts(d.nx, bx, cfg.stride);
  const auto ys = detail::window_starts(d.ny, by, cfg.stride);
  const auto zs = detail::window_starts(d.nz, bz, cfg.stride);
  const std::size_t n = series.size();
  const std::size_t m = bx * by * bz;

  std::vector<double> sum(d.voxels() * n, 0.0);
  std::vector<double> sigma_sum(d.voxels(), 0.0);
  std::vector<std::uint32_t> hits(d.voxels(), 0);
  MppcaResult result;

  // One line of windows along x per work item; lines are merged in fixed order.
  const std::size_t lines = ys.size() * zs.size();
  const std::size_t batch = std::max<std::size_t>(1, 4 * exec.workers(lines));
  std::vector<std::vector<BlockResult>> pending(batch);
  for (std::size_t first = 0; first < lines; first += batch) {
    const std::size_t count = std::min(batch, lines - first);
    parallel_for(count, exec, [&](std::size_t k) {
      const std::size_t line = first + k;
      const std::size_t y0 = ys[line % ys.size()], z0 = zs[line / ys.size()];
      auto& out = pending[k];
      out.clear();
      Eigen::MatrixXd x(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
      for (std::size_t x0 : xs) {
        for (std::size_t v = 0; v < n; ++v) {
          Eigen::Index row = 0;
          for (std::size_t z = z0; z < z0 + bz; ++z)
            for (std::size_t y = y0; y < y0 + by; ++y)
              for (std::size_t xx = x0; xx < x0 + bx; ++xx) x(row++, static_cast<Eigen::Index>(v)) = series[v](xx, y, z);
        }
        out.push_back(denoise_block(x, forced_rank));
      }
    });
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t line = first + k;
      const std::size_t y0 = ys[line % ys.size()], z0 = zs[line / ys.size()];
      for (std::size_t b = 0; b < xs.size(); ++b) {
        const auto& blk = pending[k][b];
        result.ranks.push_back(blk.rank);
        Eigen::Index row = 0;
        for (std::size_t z = z0; z < z0 + bz; ++z)
          for (std::size_t y = y0; y < y0 + by; ++y)
            for (std::size_t xx = xs[b]; xx < xs[b] + bx; ++xx, ++row) {
              const std::size_t i = xx + d.nx * (y + d.ny * z);
              for (std::size_t v = 0; v < n; ++v) sum[v * d.voxels() + i] += blk.recon(row, static_cast<Eigen::Index>(v));
              sigma_sum[i] += blk.sigma;
              ++hits[i];
            }
      }
    }
  }

  result.volumes.reserve(n);
  for (std::size_t v = 0; v < n; ++v) {
    Volume3 vol(d, 0.0, series.front().voxel_size());
    for (std::size_t i = 0; i < d.voxels(); ++i) vol[i] = sum[v * d.voxels() + i] / hits[i];
    result.volumes.push_back(std::move(vol));
  }
  result.sigma = Volume3(d, 0.0, series.front().voxel_size());
  for (std::size_t i = 0; i < d.voxels(); ++i) result.sigma[i] = sigma_sum[i] / hits[i];
  return result;
}

}  // namespace dwipc::filters
