#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dwipc/volcore/error.hpp"

namespace dwipc {

struct Dims {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  constexpr std::size_t voxels() const noexcept { return nx * ny * nz; }
  constexpr std::size_t slice_voxels() const noexcept { return nx * ny; }
  constexpr bool empty() const noexcept { return voxels() == 0; }
  friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

inline std::string to_string(const Dims& d) {
  return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
}

using VoxelSize = std::array<double, 3>;

/// Dense 3D grid, x fastest then y then z.
template <class T>
class Volume {
 public:
  using value_type = T;

  Volume() = default;

  explicit Volume(Dims dims, T fill = T{}, VoxelSize voxel_size = {1.0, 1.0, 1.0})
      : dims_(dims), voxel_size_(voxel_size), data_(dims.voxels(), fill) {
    if (dims.empty()) throw Error(ErrorKind::InvalidArgument, "volume dims must be positive");
  }

  Volume(Dims dims, std::vector<T> data, VoxelSize voxel_size = {1.0, 1.0, 1.0})
      : dims_(dims), voxel_size_(voxel_size), data_(std::move(data)) {
    if (dims.empty()) throw Error(ErrorKind::InvalidArgument, "volume dims must be positive");
    if (data_.size() != dims.voxels())
      throw Error(ErrorKind::DimsMismatch, "data length " + std::to_string(data_.size()) +
                                               " does not match dims " + to_string(dims));
  }

  const Dims& dims() const noexcept { return dims_; }
  const VoxelSize& voxel_size() const noexcept { return voxel_size_; }
  void set_voxel_size(const VoxelSize& vs) noexcept { voxel_size_ = vs; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return x + dims_.nx * (y + dims_.ny * z);
  }

  T& operator()(std::size_t x, std::size_t y, std::size_t z) noexcept { return data_[index(x, y, z)]; }
  const T& operator()(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return data_[index(x, y, z)];
  }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  std::span<T> slice(std::size_t z) noexcept {
    return std::span<T>(data_).subspan(z * dims_.slice_voxels(), dims_.slice_voxels());
  }
  std::span<const T> slice(std::size_t z) const noexcept {
    return std::span<const T>(data_).subspan(z * dims_.slice_voxels(), dims_.slice_voxels());
  }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  Dims dims_{};
  VoxelSize voxel_size_{1.0, 1.0, 1.0};
  std::vector<T> data_;
};

using Volume3 = Volume<double>;

/// Boolean gate over a grid; stored as bytes so it can be spanned.
using Mask = Volume<std::uint8_t>;

inline std::size_t count(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m) n += v != 0;
  return n;
}

template <class A, class B>
void require_same_dims(const Volume<A>& a, const Volume<B>& b, const char* what) {
  if (a.dims() != b.dims())
    throw Error(ErrorKind::DimsMismatch,
                std::string(what) + ": " + to_string(a.dims()) + " vs " + to_string(b.dims()));
}

inline bool all_finite(const Volume3& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

struct ComplexVolume3 {
  Volume3 re;
  Volume3 im;

  ComplexVolume3() = default;
  ComplexVolume3(Volume3 real, Volume3 imag) : re(std::move(real)), im(std::move(imag)) {
    require_same_dims(re, im, "complex volume parts");
  }
  explicit ComplexVolume3(Dims dims, VoxelSize vs = {1.0, 1.0, 1.0})
      : re(dims, 0.0, vs), im(dims, 0.0, vs) {}

  const Dims& dims() const noexcept { return re.dims(); }

  Volume3 magnitude() const {
    Volume3 m(re.dims(), 0.0, re.voxel_size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::hypot(re[i], im[i]);
    return m;
  }

  friend bool operator==(const ComplexVolume3&, const ComplexVolume3&) = default;
};

/// Per-voxel angles in (-pi, pi].
struct PhaseField {
  Volume3 angles;

  const Dims& dims() const noexcept { return angles.dims(); }
};

}  // namespace dwipc
