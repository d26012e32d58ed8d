#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "maflow/class_tracker.hpp"
#include "maflow/experiment.hpp"

using namespace maflow;
using C = std::complex<double>;

namespace {

// Closed-form smallest eigenvalue of a 2x2 Hermitian matrix.
double min_eig2(const ClassVector& m) {
  const double a = m(0, 0).real(), d = m(1, 1).real();
  const double b = std::abs(m(0, 1));
  return 0.5 * (a + d) - std::sqrt(0.25 * (a - d) * (a - d) + b * b);
}

double bisect(const ClassVector& a0, const ClassVector& b) {
  double lo = 0.0, hi = 1.0;
  while (min_eig2(class_at(hi, a0, b)) > 0.0) {
    hi *= 2;
    if (hi > 1e12) return std::numeric_limits<double>::infinity();
  }
  for (int i = 0; i < 200 && hi - lo > 1e-14 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (min_eig2(class_at(mid, a0, b)) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ClassVector herm(double a, C b, double d) { return ClassVector::from_rows(2, {a, b, std::conj(b), d}); }

}  // namespace

TEST_SUITE("class_tracker") {

TEST_CASE("class_at") {
  auto a0 = herm(2, C(0.5, 0.5), 1);
  auto b = herm(1, 0.3, -0.5);
  CHECK(class_at(0.0, a0, b).m == a0.m);
  auto zero = ClassVector::from_rows(2, {0, 0, 0, 0});
  CHECK(class_at(7.5, a0, zero).m == a0.m);
  auto half = class_at(0.5, ClassVector::identity(2), ClassVector::identity(2));
  CHECK(half(0, 0) == C(0.5));
  CHECK(half(1, 1) == C(0.5));
  CHECK(half(0, 1) == C(0.0));
}

TEST_CASE("max_existence_time closed cases") {
  CHECK(max_existence_time(herm(2, 0, 1), ClassVector::identity(2)) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::isinf(max_existence_time(herm(2, 0, 1), herm(-1, 0, -1))));
  CHECK(std::isinf(max_existence_time(herm(2, 0, 1), herm(0, 0, 0))));
  CHECK_THROWS_AS(max_existence_time(herm(1, 2, 1), ClassVector::identity(2)),
                  std::invalid_argument);
}

TEST_CASE("random pairs against bisection") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int finite = 0;
  for (int k = 0; k < 100; ++k) {
    const C off(u(rng), u(rng));
    const double a = 1.0 + std::abs(u(rng)) + std::abs(off);
    const double d = 1.0 + std::abs(u(rng)) + std::abs(off);
    auto a0 = herm(a, off, d);
    auto b = herm(u(rng), C(u(rng), u(rng)), u(rng));
    const double T = max_existence_time(a0, b);
    const double want = bisect(a0, b);
    if (std::isinf(want)) {
      CHECK(std::isinf(T));
      continue;
    }
    ++finite;
    CHECK(std::abs(T - want) <= 1e-10 * std::max(1.0, want));
    CHECK(min_eig2(class_at(T * (1 - 1e-9), a0, b)) > 0.0);
    CHECK(min_eig2(class_at(T + 1e-9, a0, b)) <= 0.0);
    // congruence scaling
    auto a2 = a0, b2 = b;
    for (auto& v : a2.m) v *= 3.7;
    for (auto& v : b2.m) v *= 3.7;
    CHECK(std::abs(max_existence_time(a2, b2) - T) <= 1e-12 * std::max(1.0, T));
  }
  CHECK(finite > 20);
}

TEST_CASE("library bisection agrees") {
  auto a0 = herm(2, C(0, 0.5), 1);
  auto b = herm(1, 0.3, 0.5);
  CHECK(std::abs(bisect_existence_time(a0, b) - max_existence_time(a0, b)) < 1e-12);
}

}  // TEST_SUITE
