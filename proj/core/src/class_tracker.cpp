#include "maflow/class_tracker.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace maflow {

namespace {

using CMatrix = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic>;

CMatrix to_eigen(const ClassVector& c) {
  CMatrix m(c.n, c.n);
  for (int i = 0; i < c.n; ++i)
    for (int j = 0; j < c.n; ++j) m(i, j) = c(i, j);
  // Hermitian part; the invariant allows 1e-13 drift.
  return 0.5 * (m + m.adjoint());
}

}  // namespace

ClassVector ClassVector::from_rows(int n, std::vector<std::complex<double>> rows) {
  if (n < 1 || rows.size() != static_cast<std::size_t>(n * n)) {
    throw std::invalid_argument("class matrix needs n*n entries");
  }
  ClassVector c;
  c.n = n;
  c.m = std::move(rows);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (std::abs(c(i, j) - std::conj(c(j, i))) > 1e-13) {
        throw std::invalid_argument("class matrix is not Hermitian");
      }
  return c;
}

ClassVector ClassVector::identity(int n) {
  std::vector<std::complex<double>> rows(n * n);
  for (int i = 0; i < n; ++i) rows[i * n + i] = 1.0;
  return from_rows(n, std::move(rows));
}

double ClassVector::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(to_eigen(*this), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

ClassVector class_at(double t, const ClassVector& a0, const ClassVector& b) {
  if (a0.n != b.n) throw std::invalid_argument("class dimensions differ");
  ClassVector out = a0;
  for (std::size_t k = 0; k < out.m.size(); ++k) out.m[k] -= t * b.m[k];
  return out;
}

double max_existence_time(const ClassVector& a0, const ClassVector& b) {
  if (a0.n != b.n) throw std::invalid_argument("class dimensions differ");
  const CMatrix A = to_eigen(a0);
  const CMatrix B = to_eigen(b);
  Eigen::LLT<CMatrix> llt(A);
  if (llt.info() != Eigen::Success || a0.min_eigenvalue() <= 0.0) {
    std::ostringstream msg;
    msg << "initial class is not positive definite (min eigenvalue "
        << a0.min_eigenvalue() << ")";
    throw std::invalid_argument(msg.str());
  }
  // A - tB > 0  <=>  I - t L^{-1} B L^{-*} > 0.
  const CMatrix L = llt.matrixL();
  const CMatrix Linv = L.triangularView<Eigen::Lower>().solve(
      CMatrix::Identity(a0.n, a0.n));
  const CMatrix C = Linv * B * Linv.adjoint();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (C + C.adjoint()),
                                            Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues()(a0.n - 1);
  if (!(lmax > 0.0)) return std::numeric_limits<double>::infinity();
  return 1.0 / lmax;
}

}  // namespace maflow
