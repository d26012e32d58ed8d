#pragma once

// Kahler classes on a flat torus are represented by constant Hermitian
// matrices in the basis dz^i ^ dzbar^j. Under the Kahler-Ricci flow the class
// moves along [w](t) = [w0] - t c1, and the flow lives while that stays
// positive.

#include <complex>
#include <vector>

namespace maflow {

struct ClassVector {
  int n = 1;
  std::vector<std::complex<double>> m;  ///< row-major n x n, Hermitian

  static ClassVector from_rows(int n, std::vector<std::complex<double>> rows);
  static ClassVector identity(int n);

  std::complex<double> operator()(int i, int j) const { return m[i * n + j]; }
  double min_eigenvalue() const;
};

/// A0 - t B.
ClassVector class_at(double t, const ClassVector& a0, const ClassVector& b);

/// sup{ t > 0 : A0 - t B positive definite }, +infinity when B has no
/// positive direction relative to A0. Throws std::invalid_argument when A0
/// is not positive definite.
double max_existence_time(const ClassVector& a0, const ClassVector& b);

}  // namespace maflow
