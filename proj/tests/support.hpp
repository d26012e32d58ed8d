#pragma once

// Shared helpers for the unit and acceptance suites.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "maflow/spectral.hpp"
#include "maflow/torus_geometry.hpp"

namespace maflow::testing {

inline constexpr double kPi = std::numbers::pi;

inline double sup_diff(const ScalarField& a, const ScalarField& b) {
  double m = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) m = std::max(m, std::abs(a[p] - b[p]));
  return m;
}

inline ScalarField minus_mean(ScalarField u) {
  u += -u.mean();
  return u;
}

// Sum of a few random cosines with |k| <= kmax per direction.
inline ScalarField random_trig(const TorusDomain& d, std::uint64_t seed, int kmax,
                               double amp, int terms = 6) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> kd(-kmax, kmax);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  ScalarField u(d);
  for (int t = 0; t < terms; ++t) {
    std::vector<int> k(d.real_dims());
    for (auto& v : k) v = kd(rng);
    const double a = amp * ud(rng);
    const double ph = kPi * ud(rng);
    for (std::size_t p = 0; p < u.size(); ++p) {
      double arg = ph;
      for (int r = 0; r < d.real_dims(); ++r)
        arg += 2 * kPi * k[r] * d.coordinate(p, r) / d.periods[r];
      u[p] += a * std::cos(arg);
    }
  }
  return u;
}

// 4th-order centered difference along one real direction, applied twice
// for mixed second derivatives.
inline ScalarField fd_partial(const ScalarField& u, int dir) {
  const TorusDomain& d = u.domain;
  ScalarField out(d);
  const double h = d.spacing(dir);
  std::size_t stride = 1;
  for (int r = d.real_dims() - 1; r > dir; --r) stride *= d.counts[r];
  const int N = d.counts[dir];
  for (std::size_t p = 0; p < u.size(); ++p) {
    const int i = d.index(p)[dir];
    auto at = [&](int s) {
      const int j = ((i + s) % N + N) % N;
      return u[p + (static_cast<long>(j) - i) * static_cast<long>(stride)];
    };
    out[p] = (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * h);
  }
  return out;
}

inline ScalarField fd_second(const ScalarField& u, int a, int b) {
  return fd_partial(fd_partial(u, a), b);
}

// Complex Hessian entry (i, j) from real second derivatives:
// d_i dbar_j = 1/4 (d_xi - i d_yi)(d_xj + i d_yj).
inline cplx fd_hessian_entry(const std::vector<std::vector<ScalarField>>& D2,
                             std::size_t p, int i, int j) {
  const int xi = 2 * i, yi = 2 * i + 1, xj = 2 * j, yj = 2 * j + 1;
  const double re = D2[xi][xj][p] + D2[yi][yj][p];
  const double im = D2[xi][yj][p] - D2[yi][xj][p];
  return 0.25 * cplx(re, im);
}

inline std::vector<std::vector<ScalarField>> fd_all_second(const ScalarField& u) {
  const int R = u.domain.real_dims();
  std::vector<std::vector<ScalarField>> D2(R, std::vector<ScalarField>(R));
  for (int a = 0; a < R; ++a)
    for (int b = 0; b < R; ++b) D2[a][b] = fd_second(u, a, b);
  return D2;
}

// Same stencil evaluated at one point only, for grids too large to hold
// every second derivative.
inline double fd_second_at(const ScalarField& u, std::size_t p, int a, int b) {
  const TorusDomain& d = u.domain;
  static constexpr double c[5] = {1.0, -8.0, 0.0, 8.0, -1.0};
  auto stride = [&](int dir) {
    std::size_t s = 1;
    for (int r = d.real_dims() - 1; r > dir; --r) s *= d.counts[r];
    return static_cast<long>(s);
  };
  auto shift = [&](long q, int dir, int s) {
    const int N = d.counts[dir];
    const int i = static_cast<int>((q / stride(dir)) % N);
    const int j = ((i + s) % N + N) % N;
    return q + (j - i) * stride(dir);
  };
  double acc = 0.0;
  for (int s = -2; s <= 2; ++s)
    for (int t = -2; t <= 2; ++t) {
      const double w = c[s + 2] * c[t + 2];
      if (w == 0.0) continue;
      acc += w * u[shift(shift(static_cast<long>(p), a, s), b, t)];
    }
  return acc / (144.0 * d.spacing(a) * d.spacing(b));
}

inline cplx fd_hessian_at(const ScalarField& u, std::size_t p, int i, int j) {
  const int xi = 2 * i, yi = 2 * i + 1, xj = 2 * j, yj = 2 * j + 1;
  const double re = fd_second_at(u, p, xi, xj) + fd_second_at(u, p, yi, yj);
  const double im = fd_second_at(u, p, xi, yj) - fd_second_at(u, p, yi, xj);
  return 0.25 * cplx(re, im);
}

}  // namespace maflow::testing
