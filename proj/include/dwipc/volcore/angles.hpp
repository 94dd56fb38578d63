#pragma once

#include <cmath>
#include <numbers>

#include "dwipc/volcore/error.hpp"

namespace dwipc {

inline constexpr double kPi = std::numbers::pi;

/// Canonical representative of theta in (-pi, pi].
inline double wrap_angle(double theta) {
  if (!std::isfinite(theta)) throw Error(ErrorKind::InvalidArgument, "wrap_angle: non-finite angle");
  if (theta > -kPi && theta <= kPi) return theta;
  double r = std::remainder(theta, 2.0 * kPi);  // in [-pi, pi]
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

enum class Quadrant { Q1, Q2, Q3, Q4 };

inline const char* to_string(Quadrant q) {
  switch (q) {
    case Quadrant::Q1: return "Q1";
    case Quadrant::Q2: return "Q2";
    case Quadrant::Q3: return "Q3";
    case Quadrant::Q4: return "Q4";
  }
  return "?";
}

// Zero components count as nonnegative, so the axes fall in Q1, Q2 or Q4.
inline Quadrant quadrant_of(double re, double im) {
  if (!std::isfinite(re) || !std::isfinite(im))
    throw Error(ErrorKind::InvalidArgument, "quadrant_of: non-finite component");
  if (im >= 0.0) return re >= 0.0 ? Quadrant::Q1 : Quadrant::Q2;
  return re >= 0.0 ? Quadrant::Q4 : Quadrant::Q3;
}

inline Quadrant quadrant_of_angle(double theta) { return quadrant_of(std::cos(theta), std::sin(theta)); }

constexpr bool opposite_diagonal(Quadrant a, Quadrant b) noexcept {
  using enum Quadrant;
  return (a == Q1 && b == Q3) || (a == Q3 && b == Q1) || (a == Q2 && b == Q4) || (a == Q4 && b == Q2);
}

}  // namespace dwipc
