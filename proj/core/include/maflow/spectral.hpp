#pragma once

// Periodic pseudospectral calculus on a TorusDomain.
//
// Conventions: d/dz^i = (d/dx^i - i d/dy^i)/2 and d/dzbar^j = (d/dx^j +
// i d/dy^j)/2, so d^2/dz dzbar = (d_xx + d_yy)/4 on each complex factor.
// First-derivative wavenumber tables carry a zero at the Nyquist index and
// every mixed derivative symbol is a product of those tables.

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "maflow/torus_geometry.hpp"

namespace maflow {

/// FFT plans, wavenumber tables and the two-thirds dealias mask for one
/// domain. Immutable after construction; transforms work on caller-owned
/// buffers, so one workspace can be shared between threads.
class SpectralWorkspace {
 public:
  explicit SpectralWorkspace(TorusDomain domain);
  ~SpectralWorkspace();
  SpectralWorkspace(const SpectralWorkspace&) = delete;
  SpectralWorkspace& operator=(const SpectralWorkspace&) = delete;

  const TorusDomain& domain() const { return domain_; }
  std::size_t points() const { return points_; }

  /// Unnormalized forward DFT.
  std::vector<cplx> forward(std::span<const double> real) const;
  std::vector<cplx> forward(std::span<const cplx> values) const;
  /// Inverse DFT including the 1/N factor, in place.
  void inverse(std::vector<cplx>& spectrum) const;
  /// Inverse DFT keeping only the real part.
  std::vector<double> inverse_real(std::vector<cplx> spectrum) const;

  /// Angular wavenumber 2 pi k / L along `dir` for every mode, Nyquist zeroed.
  std::span<const double> wavenumbers(int dir) const { return k_[dir]; }
  /// Symbol of d/dz^i and d/dzbar^i for every mode.
  std::span<const cplx> dz_symbol(int i) const { return dz_[i]; }
  std::span<const cplx> dzbar_symbol(int i) const { return dzbar_[i]; }
  /// True where the two-thirds rule keeps the mode.
  bool keeps(std::size_t mode) const { return mask_[mode] != 0; }

  /// Integer wavenumber of index j on an N-point grid, in (-N/2, N/2].
  static int integer_wavenumber(int j, int count);
  /// Two-thirds rule: |k| <= count/3.
  static bool in_dealias_band(int k, int count);

 private:
  struct Plans;

  TorusDomain domain_;
  std::size_t points_;
  std::vector<std::vector<double>> k_;
  std::vector<std::vector<cplx>> dz_;
  std::vector<std::vector<cplx>> dzbar_;
  std::vector<unsigned char> mask_;
  std::unique_ptr<Plans> plans_;
};

/// d u / d x^dir for a real direction dir in [0, 2n).
ScalarField partial(const SpectralWorkspace& ws, const ScalarField& u, int dir);

/// u_{i jbar} = d^2 u / dz^i dzbar^j.
HermitianField complex_hessian(const SpectralWorkspace& ws, const ScalarField& u);

/// g^{i jbar} d_i d_jbar u.
ScalarField laplacian(const SpectralWorkspace& ws, const ScalarField& u,
                      const HermitianField& g);

/// g^{i jbar} (d_i u)(d_jbar u), pointwise nonnegative.
ScalarField gradient_norm_sq(const SpectralWorkspace& ws, const ScalarField& u,
                             const HermitianField& g);

/// u minus its density-weighted mean.
ScalarField mean_normalize(const ScalarField& u, const ScalarField& density);

/// Calabi's third-order quantity: the g_tilde-norm squared of the third
/// derivatives u_{i jbar k}, with the antiholomorphic slot contracted by
/// the conjugate inverse metric.
ScalarField third_order_S(const SpectralWorkspace& ws, const ScalarField& u,
                          const HermitianField& g_tilde);

/// Zeroes every mode outside the two-thirds band.
ScalarField dealias(const SpectralWorkspace& ws, const ScalarField& u);

}  // namespace maflow
