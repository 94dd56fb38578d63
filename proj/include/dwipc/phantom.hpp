#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dwipc/dti.hpp"
#include "dwipc/parallel.hpp"
#include "dwipc/volcore/angles.hpp"
#include "dwipc/volcore/series.hpp"

namespace dwipc::phantom {

enum class Shape { Box, Sphere };

/// Box bounds are voxel indices, [lo, hi). Spheres are clipped to the grid but
/// their centre must lie inside it.
struct Region {
  Shape shape = Shape::Box;
  Vec3 lo{0, 0, 0};
  Vec3 hi{0, 0, 0};
  Vec3 center{0, 0, 0};
  double radius = 0.0;
  Vec3 eigenvalues{0, 0, 0};  // mm^2/s, principal first
  Vec3 direction{1, 0, 0};
  double s0 = 0.0;
  bool wm = false;
};

struct PhantomSpec {
  Dims dims{64, 64, 8};
  VoxelSize voxel_size{2.0, 2.0, 2.0};
  std::vector<Region> regions;  // later regions win on overlap
};

/// Two crossing rectangular bundles (along x and along y) and an isotropic sphere.
inline PhantomSpec default_phantom(Dims dims = {64, 64, 8}) {
  const auto fx = [&](double f) { return std::floor(f * static_cast<double>(dims.nx)); };
  const auto fy = [&](double f) { return std::floor(f * static_cast<double>(dims.ny)); };
  const double nz = static_cast<double>(dims.nz);
  PhantomSpec spec;
  spec.dims = dims;
  Region along_x;
  along_x.lo = {fx(0.125), fy(0.30), 0};
  along_x.hi = {fx(0.875), fy(0.45), nz};
  along_x.eigenvalues = {1.7e-3, 0.3e-3, 0.3e-3};
  along_x.direction = {1, 0, 0};
  along_x.s0 = 100.0;
  along_x.wm = true;
  Region along_y = along_x;
  along_y.lo = {fx(0.55), fy(0.125), 0};
  along_y.hi = {fx(0.70), fy(0.875), nz};
  along_y.direction = {0, 1, 0};
  Region sphere;
  sphere.shape = Shape::Sphere;
  sphere.center = {fx(0.28), fy(0.70), (nz - 1.0) / 2.0};
  sphere.radius = 0.12 * static_cast<double>(std::min(dims.nx, dims.ny));
  sphere.eigenvalues = {0.8e-3, 0.8e-3, 0.8e-3};
  sphere.s0 = 120.0;
  spec.regions = {along_x, along_y, sphere};
  return spec;
}

struct Phantom {
  dti::TensorField tensors;
  Mask wm;
  Mask background;  // S0 == 0
};

inline bool contains(const Region& r, double x, double y, double z) {
  if (r.shape == Shape::Box) return x >= r.lo[0] && x < r.hi[0] && y >= r.lo[1] && y < r.hi[1] && z >= r.lo[2] && z < r.hi[2];
  const double dx = x - r.center[0], dy = y - r.center[1], dz = z - r.center[2];
  return dx * dx + dy * dy + dz * dz <= r.radius * r.radius;
}

inline void check_region(const Region& r, const Dims& d, std::size_t index) {
  const auto where = "phantom region " + std::to_string(index);
  const Vec3 ext{static_cast<double>(d.nx), static_cast<double>(d.ny), static_cast<double>(d.nz)};
  for (double l : r.eigenvalues)
    if (!(l >= 0.0)) throw Error(ErrorKind::InvalidArgument, where + ": eigenvalues must be >= 0");
  if (!(r.s0 >= 0.0)) throw Error(ErrorKind::InvalidArgument, where + ": S0 must be >= 0");
  if (r.shape == Shape::Box) {
    for (int a = 0; a < 3; ++a)
      if (r.lo[a] < 0.0 || r.hi[a] > ext[a] || r.lo[a] >= r.hi[a])
        throw Error(ErrorKind::InvalidArgument, where + ": box outside dims " + to_string(d));
  } else {
    for (int a = 0; a < 3; ++a)
      if (r.center[a] < 0.0 || r.center[a] > ext[a] - 1.0)
        throw Error(ErrorKind::InvalidArgument, where + ": sphere centre outside dims " + to_string(d));
    if (!(r.radius > 0.0)) throw Error(ErrorKind::InvalidArgument, where + ": sphere radius must be > 0");
  }
}

inline Phantom build_phantom(const PhantomSpec& spec) {
  const auto& d = spec.dims;
  for (std::size_t k = 0; k < spec.regions.size(); ++k) check_region(spec.regions[k], d, k);
  std::vector<dti::Tensor6> region_tensors;
  for (const auto& r : spec.regions) region_tensors.push_back(dti::tensor_from_eigen(r.eigenvalues, r.direction));

  Phantom out{dti::TensorField(d, spec.voxel_size), Mask(d, 0, spec.voxel_size), Mask(d, 0, spec.voxel_size)};
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::size_t i = out.tensors.s0.index(x, y, z);
        for (std::size_t k = spec.regions.size(); k-- > 0;) {
          const auto& r = spec.regions[k];
          if (!contains(r, static_cast<double>(x), static_cast<double>(y), static_cast<double>(z))) continue;
          out.tensors.set(i, region_tensors[k]);
          out.tensors.s0[i] = r.s0;
          out.wm[i] = r.wm;
          break;
        }
        out.background[i] = out.tensors.s0[i] == 0.0;
      }
  return out;
}

/// Noise-free monoexponential signal S0 exp(-b g^T D g).
inline MagnitudeSeries simulate_dwi(const dti::TensorField& tensors, const GradientTable& grads) {
  MagnitudeSeries out;
  out.gradients = grads;
  for (const auto& [b, g] : grads.entries()) {
    Volume3 v(tensors.dims(), 0.0, tensors.s0.voxel_size());
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = b == 0.0 ? tensors.s0[i] : tensors.s0[i] * std::exp(-b * tensors.at(i).quadratic(g));
    out.volumes.push_back(std::move(v));
  }
  return out;
}

struct BackgroundPhaseSpec {
  double amplitude = 1.0;           // rad
  std::array<double, 2> frequency{1.0, 1.0};  // cycles per field of view
  std::array<double, 2> ramp{kPi, kPi / 2.0};  // rad per field of view
};

/// Smooth low-frequency phase: a sin(2 pi fx x/nx) cos(2 pi fy y/ny) + px x/nx + py y/ny.
inline PhaseField synth_background_phase(const Dims& d, const BackgroundPhaseSpec& spec) {
  PhaseField out{Volume3(d)};
  const double nx = static_cast<double>(d.nx), ny = static_cast<double>(d.ny);
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const double u = static_cast<double>(x) / nx, v = static_cast<double>(y) / ny;
        const double phase = spec.amplitude * std::sin(2.0 * kPi * spec.frequency[0] * u) *
                                 std::cos(2.0 * kPi * spec.frequency[1] * v) +
                             spec.ramp[0] * u + spec.ramp[1] * v;
        out.angles(x, y, z) = wrap_angle(phase);
      }
  return out;
}

enum class NoisePattern { Constant, LinearRamp, GaussianBump };

struct NoiseSpec {
  double sigma0 = 5.0;
  NoisePattern pattern = NoisePattern::LinearRamp;
  int axis = 0;         // linear ramp
  double slope = 1.0;   // sigma0 at index 0 rising to (1 + slope) sigma0 at the far edge
  Vec3 center{0, 0, 0};  // gaussian bump, voxel coordinates
  double width = 8.0;
  double amplitude = 1.0;
  std::uint64_t seed = 1;
};

inline constexpr const char* kGeneratorName = "std::mt19937_64 (splitmix64 per-volume substreams), std::normal_distribution";

/// Analytic noise standard deviation per voxel.
inline Volume3 sigma_map(const Dims& d, const NoiseSpec& spec) {
  Volume3 out(d);
  const std::array<std::size_t, 3> n{d.nx, d.ny, d.nz};
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::array<double, 3> p{static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
        double factor = 1.0;
        if (spec.pattern == NoisePattern::LinearRamp) {
          const auto a = static_cast<std::size_t>(spec.axis);
          const double t = n[a] > 1 ? p[a] / static_cast<double>(n[a] - 1) : 0.0;
          factor = 1.0 + spec.slope * t;
        } else if (spec.pattern == NoisePattern::GaussianBump) {
          double r2 = 0.0;
          for (int a = 0; a < 3; ++a) r2 += (p[a] - spec.center[a]) * (p[a] - spec.center[a]);
          factor = 1.0 + spec.amplitude * std::exp(-r2 / (2.0 * spec.width * spec.width));
        }
        out(x, y, z) = spec.sigma0 * factor;
      }
  for (double s : out)
    if (!(s >= 0.0) || !std::isfinite(s)) throw Error(ErrorKind::InvalidArgument, "noise spec yields negative sigma");
  return out;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

struct NoisyData {
  ComplexSeries series;
  Volume3 sigma;
};

/// S e^{j phi} plus independent N(0, sigma(x)^2) draws on each part.
/// Volume k draws from its own stream seeded by (seed, k).
inline NoisyData add_complex_noise(const MagnitudeSeries& clean, const PhaseField& phase, const NoiseSpec& noise,
                                   const Exec& exec = {}) {
  clean.validate();
  require_same_dims(clean.volumes.front(), phase.angles, "add_complex_noise");
  NoisyData out{ComplexSeries{}, sigma_map(clean.dims(), noise)};
  out.series.gradients = clean.gradients;
  out.series.volumes.resize(clean.size());
  parallel_for(clean.size(), exec, [&](std::size_t k) {
    std::mt19937_64 rng(splitmix64(noise.seed ^ splitmix64(static_cast<std::uint64_t>(k) + 1)));
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto& s = clean.volumes[k];
    ComplexVolume3 v(s.dims(), s.voxel_size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] < 0.0) throw Error(ErrorKind::InvalidData, "add_complex_noise: negative clean magnitude");
      const double er = normal(rng), ei = normal(rng);
      v.re[i] = s[i] * std::cos(phase.angles[i]) + out.sigma[i] * er;
      v.im[i] = s[i] * std::sin(phase.angles[i]) + out.sigma[i] * ei;
    }
    out.series.volumes[k] = std::move(v);
  });
  return out;
}

}  // namespace dwipc::phantom
