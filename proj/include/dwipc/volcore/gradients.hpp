#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "dwipc/volcore/error.hpp"

namespace dwipc {

using Vec3 = std::array<double, 3>;

struct GradientEntry {
  double b = 0.0;  // s/mm^2
  Vec3 g{0.0, 0.0, 0.0};

  friend bool operator==(const GradientEntry&, const GradientEntry&) = default;
};

inline constexpr double kUnitNormTolerance = 1e-6;

class GradientTable {
 public:
  GradientTable() = default;
  explicit GradientTable(std::vector<GradientEntry> entries) : entries_(std::move(entries)) { validate(); }

  const std::vector<GradientEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const GradientEntry& operator[](std::size_t i) const noexcept { return entries_[i]; }

  std::size_t count_b0() const noexcept {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.b == 0.0;
    return n;
  }

  friend bool operator==(const GradientTable&, const GradientTable&) = default;

 private:
  void validate() const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      const auto row = "gradient entry " + std::to_string(i);
      if (!std::isfinite(e.b) || e.b < 0.0) throw Error(ErrorKind::InvalidData, row + ": b-value must be >= 0");
      for (double c : e.g)
        if (!std::isfinite(c)) throw Error(ErrorKind::InvalidData, row + ": non-finite direction");
      if (e.b > 0.0) {
        const double norm = std::sqrt(e.g[0] * e.g[0] + e.g[1] * e.g[1] + e.g[2] * e.g[2]);
        if (std::abs(norm - 1.0) > kUnitNormTolerance)
          throw Error(ErrorKind::NonUnitDirection, row + ": |g| = " + std::to_string(norm));
      }
    }
  }

  std::vector<GradientEntry> entries_;
};

/// Roughly uniform unit directions on the upper hemisphere (Fibonacci lattice).
inline std::vector<Vec3> hemisphere_directions(std::size_t n) {
  std::vector<Vec3> dirs;
  dirs.reserve(n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double r = std::sqrt(1.0 - z * z);
    const double phi = golden * static_cast<double>(i);
    Vec3 d{r * std::cos(phi), r * std::sin(phi), z};
    const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    for (auto& c : d) c /= norm;
    dirs.push_back(d);
  }
  return dirs;
}

/// `b0_count` null entries followed by one shell of `directions` at `b_value`.
inline GradientTable single_shell_scheme(std::size_t b0_count, std::size_t directions, double b_value) {
  std::vector<GradientEntry> entries(b0_count);
  for (const auto& d : hemisphere_directions(directions)) entries.push_back({b_value, d});
  return GradientTable(std::move(entries));
}

}  // namespace dwipc
