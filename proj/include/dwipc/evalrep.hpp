#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "dwipc/volcore/series.hpp"
#include "dwipc/volcore/volume.hpp"

namespace dwipc::evalrep {

struct MetricSeries {
  std::string label;
  std::vector<std::pair<std::size_t, double>> values;  // (volume or slice index, value)

  double mean() const {
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (const auto& [i, v] : values) s += v;
    return s / static_cast<double>(values.size());
  }
  double mean_abs() const {
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (const auto& [i, v] : values) s += std::abs(v);
    return s / static_cast<double>(values.size());
  }
};

/// Mean |est - gt| over every voxel of each volume. With `mask`, only masked voxels count.
inline MetricSeries mae_per_volume(const MagnitudeSeries& est, const MagnitudeSeries& gt, std::string label = "",
                                   const Mask* mask = nullptr) {
  if (est.size() != gt.size()) throw Error(ErrorKind::CountMismatch, "mae_per_volume: series lengths differ");
  MetricSeries out{std::move(label), {}};
  for (std::size_t v = 0; v < est.size(); ++v) {
    require_same_dims(est.volumes[v], gt.volumes[v], "mae_per_volume");
    if (mask) require_same_dims(est.volumes[v], *mask, "mae_per_volume mask");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < est.volumes[v].size(); ++i) {
      if (mask && !(*mask)[i]) continue;
      sum += std::abs(est.volumes[v][i] - gt.volumes[v][i]);
      ++n;
    }
    out.values.emplace_back(v, n ? sum / static_cast<double>(n) : 0.0);
  }
  return out;
}

/// Signed mean FA error over WM voxels of each axial slice; slices without WM are skipped.
inline MetricSeries me_per_slice(const Volume3& fa_est, const Volume3& fa_gt, const Mask& wm, std::string label = "") {
  require_same_dims(fa_est, fa_gt, "me_per_slice");
  require_same_dims(fa_est, wm, "me_per_slice mask");
  MetricSeries out{std::move(label), {}};
  const auto& d = fa_est.dims();
  for (std::size_t z = 0; z < d.nz; ++z) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = z * d.slice_voxels(); i < (z + 1) * d.slice_voxels(); ++i) {
      if (!wm[i]) continue;
      sum += fa_est[i] - fa_gt[i];
      ++n;
    }
    if (n) out.values.emplace_back(z, sum / static_cast<double>(n));
  }
  return out;
}

inline Volume3 error_map(const Volume3& fa_est, const Volume3& fa_gt) {
  require_same_dims(fa_est, fa_gt, "error_map");
  Volume3 out(fa_est.dims(), 0.0, fa_est.voxel_size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fa_est[i] - fa_gt[i];
  return out;
}

enum class Palette { Gray, Spectrum };

/// Display windows used for the standard renders.
inline constexpr std::array<double, 2> kDwiWindow{-20.0, 200.0};
inline constexpr std::array<double, 2> kFaWindow{0.0, 1.0};
inline constexpr std::array<double, 2> kErrorWindow{-0.4, 0.4};

/// Affine map of [lo, hi] onto 0..255, clamped.
inline std::uint8_t window_level(double v, double lo, double hi) {
  const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(t * 255.0));
}

/// Six-stop spectrum: black, blue, cyan, green, yellow, red at 0, 51, 102, 153, 204, 255.
inline std::array<std::uint8_t, 3> spectrum_color(std::uint8_t level) {
  static constexpr std::array<std::array<double, 3>, 6> kStops{
      {{0, 0, 0}, {0, 0, 255}, {0, 255, 255}, {0, 255, 0}, {255, 255, 0}, {255, 0, 0}}};
  const double pos = level / 51.0;
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(pos), 4);
  const double t = pos - static_cast<double>(k);
  std::array<std::uint8_t, 3> rgb{};
  for (std::size_t c = 0; c < 3; ++c)
    rgb[c] = static_cast<std::uint8_t>(std::lround(kStops[k][c] + t * (kStops[k + 1][c] - kStops[k][c])));
  return rgb;
}

/// Writes axial slice `z` as binary PGM (gray) or PPM (spectrum).
inline void render_slice(const Volume3& vol, std::size_t z, std::array<double, 2> window, Palette palette,
                         const std::filesystem::path& path) {
  const auto& d = vol.dims();
  if (z >= d.nz) throw Error(ErrorKind::InvalidArgument, "render_slice: slice " + std::to_string(z) + " out of range");
  if (!(window[0] < window[1])) throw Error(ErrorKind::InvalidArgument, "render_slice: window lo must be < hi");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << (palette == Palette::Gray ? "P5\n" : "P6\n") << d.nx << ' ' << d.ny << "\n255\n";
  std::vector<std::uint8_t> pixels;
  // Image rows run top to bottom, so y is flipped.
  for (std::size_t row = 0; row < d.ny; ++row) {
    const std::size_t y = d.ny - 1 - row;
    for (std::size_t x = 0; x < d.nx; ++x) {
      const auto level = window_level(vol(x, y, z), window[0], window[1]);
      if (palette == Palette::Gray) {
        pixels.push_back(level);
      } else {
        const auto rgb = spectrum_color(level);
        pixels.insert(pixels.end(), rgb.begin(), rgb.end());
      }
    }
  }
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw Error(ErrorKind::Io, "short write to " + path.string());
}

/// `label,index,value` rows, nine significant digits, series in the given order.
inline void write_metrics_csv(const std::vector<MetricSeries>& series, const std::filesystem::path& path) {
  if (series.empty()) throw Error(ErrorKind::InvalidArgument, "write_metrics_csv: no series");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "label,index,value\n";
  char buf[64];
  for (const auto& s : series)
    for (const auto& [index, value] : s.values) {
      std::snprintf(buf, sizeof buf, "%.9g", value);
      out << s.label << ',' << index << ',' << buf << '\n';
    }
  if (!out) throw Error(ErrorKind::Io, "short write to " + path.string());
}

}  // namespace dwipc::evalrep
