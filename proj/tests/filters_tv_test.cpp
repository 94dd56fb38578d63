#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "dwipc/filters/tv.hpp"

using namespace dwipc;
using namespace dwipc::filters;

namespace {

// Plain gradient descent on the ROF energy with the TV term smoothed by eps.
std::vector<double> gd_minimizer(const std::vector<double>& f, std::size_t nx, std::size_t ny, double lambda,
                                 double eps = 1e-6, double lr = 1e-4, int steps = 100000) {
  std::vector<double> u = f, g(u.size());
  const auto at = [&](std::size_t x, std::size_t y) { return u[x + nx * y]; };
  for (int s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < u.size(); ++i) g[i] = u[i] - f[i];
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = 0; x < nx; ++x) {
        const double dx = x + 1 < nx ? at(x + 1, y) - at(x, y) : 0.0;
        const double dy = y + 1 < ny ? at(x, y + 1) - at(x, y) : 0.0;
        const double n = std::sqrt(dx * dx + dy * dy + eps);
        const std::size_t i = x + nx * y;
        if (x + 1 < nx) {
          g[i] -= lambda * dx / n;
          g[i + 1] += lambda * dx / n;
        }
        if (y + 1 < ny) {
          g[i] -= lambda * dy / n;
          g[i + nx] += lambda * dy / n;
        }
      }
    for (std::size_t i = 0; i < u.size(); ++i) u[i] -= lr * g[i];
  }
  return u;
}

std::vector<double> step_image(double height) {
  std::vector<double> f(16);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) f[x + 4 * y] = x < 2 ? 0.0 : height;
  return f;
}

}  // namespace

TEST(TvDenoise, ConstantSliceIsFixedPoint) {
  const Volume3 v({6, 5, 2}, 5.0);
  for (double lambda : {0.1, 2.0, 50.0}) EXPECT_EQ(tv_denoise(v, lambda, 10), v);
}

TEST(TvDenoise, TinyLambdaIsIdentity) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 10.0);
  Volume3 v({7, 6, 3});
  for (auto& x : v) x = n(rng);
  const auto out = tv_denoise(v, 1e-9, 10);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(out[i], v[i], 1e-6);
}

TEST(TvDenoise, StepImageConvergesToGradientDescentMinimizer) {
  const auto f = step_image(10.0);
  const auto oracle = gd_minimizer(f, 4, 4, 2.0);
  const auto u = tv_denoise_slice(f, 4, 4, 2.0, 200);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(u[i], oracle[i], 1e-3) << "pixel " << i;
  // the oracle itself sits at (1, 1, 9, 9) on every row
  EXPECT_NEAR(oracle[0], 1.0, 1e-3);
  EXPECT_NEAR(oracle[3], 9.0, 1e-3);
}

TEST(TvDenoise, TenIterationsLowerTheObjective) {
  const auto f = step_image(10.0);
  const auto u10 = tv_denoise_slice(f, 4, 4, 2.0, 10);
  const auto oracle = gd_minimizer(f, 4, 4, 2.0);
  const double e0 = rof_objective(f, f, 4, 4, 2.0);
  const double e10 = rof_objective(u10, f, 4, 4, 2.0);
  const double emin = rof_objective(oracle, f, 4, 4, 2.0);
  EXPECT_LT(e10, e0);
  EXPECT_GE(e10, emin - 1e-6);
}

TEST(TvDenoise, ObjectiveNonIncreasingOnRandomSlices) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t nx = 8 + trial % 5, ny = 6 + trial % 3;
    std::vector<double> f(nx * ny);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = (i % nx < nx / 2 ? 0.0 : 50.0) + 5.0 * n(rng);
    double prev = rof_objective(f, f, nx, ny, 2.0);
    tv_denoise_slice(f, nx, ny, 2.0, 10, [&](int it, std::span<const double> u) {
      const double e = rof_objective(u, f, nx, ny, 2.0);
      EXPECT_LE(e, prev + 1e-9) << "trial " << trial << " iteration " << it;
      prev = e;
    });
  }
}

TEST(TvDenoise, DeterministicAcrossWorkerCounts) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 3.0);
  Volume3 v({9, 9, 6});
  for (auto& x : v) x = n(rng);
  EXPECT_EQ(tv_denoise(v, 2.0, 10, Exec{1}), tv_denoise(v, 2.0, 10, Exec{4}));
}

TEST(TvDenoise, RejectsBadParameters) {
  const Volume3 v({3, 3, 1}, 1.0);
  EXPECT_THROW(tv_denoise(v, 0.0, 10), Error);
  EXPECT_THROW(tv_denoise(v, 1.0, 0), Error);
}
