#pragma once

// Flat complex tori C^n / Lambda (rectangular lattice, n <= 2), real scalar
// fields and Hermitian matrix fields sampled on the periodic grid.
//
// Real coordinates are ordered (x1, y1, x2, y2) with z^i = x^i + i y^i. All
// grids are stored row-major in that order, so the last real direction is
// the fastest varying one.

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace maflow {

using cplx = std::complex<double>;

class SpectralWorkspace;

struct TorusDomain {
  int n = 1;                    ///< complex dimension
  std::vector<int> counts;      ///< samples per real direction, size 2n
  std::vector<double> periods;  ///< period per real direction, size 2n

  /// Validating constructor. Every count must be even and >= 8; periods
  /// default to 1.0 when empty.
  static TorusDomain make(int n, std::vector<int> counts,
                          std::vector<double> periods = {});
  /// Same count in every real direction.
  static TorusDomain uniform(int n, int count, double period = 1.0);

  int real_dims() const { return 2 * n; }
  std::size_t points() const;
  double spacing(int dir) const { return periods[dir] / counts[dir]; }
  double cell_volume() const;
  double volume() const;

  /// Multi-index of a flat point index.
  std::array<int, 4> index(std::size_t point) const;
  /// Real coordinate of `point` along direction `dir`.
  double coordinate(std::size_t point, int dir) const;

  bool operator==(const TorusDomain&) const = default;
};

/// Real field, one sample per grid point.
struct ScalarField {
  TorusDomain domain;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(TorusDomain d, double fill = 0.0);
  ScalarField(TorusDomain d, std::vector<double> v);

  /// Samples fn at every grid point; fn receives the 2n real coordinates.
  static ScalarField sample(const TorusDomain& d,
                            const std::function<double(std::span<const double>)>& fn);

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  double min() const;
  double max() const;
  double sup_abs() const;
  /// Plain grid average.
  double mean() const;

  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator*=(double s);
  ScalarField& operator+=(double s);
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double s, ScalarField a);

/// n x n complex matrix (n <= 2), row-major.
struct PointMatrix {
  int n = 1;
  std::array<cplx, 4> a{};

  cplx& operator()(int i, int j) { return a[i * n + j]; }
  cplx operator()(int i, int j) const { return a[i * n + j]; }

  static PointMatrix identity(int n);
  static PointMatrix diagonal(std::span<const double> d);
  /// Builds from row-major entries; size must be n*n.
  static PointMatrix from_rows(int n, std::span<const cplx> rows);

  PointMatrix& operator+=(const PointMatrix& o);
  PointMatrix& operator*=(double s);
};

PointMatrix operator+(PointMatrix a, const PointMatrix& b);
PointMatrix operator-(PointMatrix a, const PointMatrix& b);
PointMatrix operator*(double s, PointMatrix a);
PointMatrix operator*(const PointMatrix& a, const PointMatrix& b);

double det(const PointMatrix& m);  // real part; m assumed Hermitian
PointMatrix inverse(const PointMatrix& m);
/// Adjugate: det(m) * inverse(m), polynomial in the entries.
PointMatrix adjugate(const PointMatrix& m);
/// Smallest and largest eigenvalue of a Hermitian matrix.
std::pair<double, double> eigen_extrema(const PointMatrix& m);
/// Max entrywise |m - m^*|.
double hermitian_defect(const PointMatrix& m);
PointMatrix symmetrized(const PointMatrix& m);

/// One Hermitian n x n matrix per grid point, stored point-major with the
/// full matrix kept.
struct HermitianField {
  TorusDomain domain;
  std::vector<cplx> data;  ///< size points * n * n
  bool metric = false;     ///< positive definite at every point

  HermitianField() = default;
  explicit HermitianField(TorusDomain d);

  int n() const { return domain.n; }
  std::size_t points() const { return domain.points(); }

  PointMatrix at(std::size_t p) const;
  void set(std::size_t p, const PointMatrix& m);
  cplx& entry(std::size_t p, int i, int j) {
    return data[p * domain.n * domain.n + i * domain.n + j];
  }
  cplx entry(std::size_t p, int i, int j) const {
    return data[p * domain.n * domain.n + i * domain.n + j];
  }

  /// H <- (H + H^*)/2 at every point.
  void resymmetrize();
  double hermitian_defect() const;
};

HermitianField operator+(const HermitianField& a, const HermitianField& b);
HermitianField operator*(double s, const HermitianField& a);

/// Constant metric field. Rejects coefficients that are not positive
/// definite, naming the offending eigenvalue.
HermitianField make_flat_metric(const TorusDomain& domain,
                                const PointMatrix& coeff);

/// g + (complex Hessian of psi). Positivity is not asserted; the result is
/// flagged as a metric only if g was and every point is positive definite.
HermitianField perturb_metric(const SpectralWorkspace& ws,
                              const HermitianField& g, const ScalarField& psi);

ScalarField det_field(const HermitianField& h);

/// Pointwise inverse. Throws DegenerateMetric when |det| < 1e-12 anywhere.
HermitianField inverse_field(const HermitianField& h);

ScalarField min_eigenvalue_field(const HermitianField& h);

/// Pointwise extrema of the eigenvalues of g^{-1} alpha (the relative
/// eigenvalues of the pencil alpha - lambda g). Requires g metric.
std::pair<ScalarField, ScalarField> relative_eigen_extrema(
    const HermitianField& alpha, const HermitianField& g);

/// tr_g alpha = g^{i jbar} alpha_{i jbar} = tr(g^{-1} alpha).
ScalarField trace_pair(const HermitianField& alpha, const HermitianField& g);

/// Sum of phi * density * cell volume.
double integrate(const ScalarField& phi, const ScalarField& density);
double integrate(const ScalarField& phi);

}  // namespace maflow
