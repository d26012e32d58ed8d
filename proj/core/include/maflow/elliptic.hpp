#pragma once

// Stationary solvers used as oracles for the flow limits. They share only
// the raw FFT with the flow integrator: derivative symbols, Hessians and
// pointwise algebra are rebuilt here.

#include <vector>

#include "maflow/spectral.hpp"
#include "maflow/torus_geometry.hpp"

namespace maflow {

struct NewtonConfig {
  int max_iterations = 40;
  double tolerance = 1e-11;        ///< sup-norm residual
  double min_damping = 1.0 / 1024; ///< smallest backtracking factor
  double cg_tolerance = 1e-14;     ///< relative residual of the inner solve
  int cg_max_iterations = 2000;

  void validate() const;
};

struct NewtonResult {
  ScalarField u;
  double c = 0.0;  ///< solvability constant (Monge-Ampere only)
  std::vector<double> residual_history;
  int iterations = 0;
};

struct StationaryN1 {
  ScalarField u;
  double c = 0.0;
  double residual = 0.0;
};

/// n = 1 stationary Calabi-Yau flow: log(1 + u_{z zbar}/g0) + f = c is the
/// linear Poisson problem u_{z zbar} = g0 (e^{c-f} - 1) with e^c fixed by
/// solvability. Returns the mean-zero solution.
StationaryN1 solve_stationary_n1(const SpectralWorkspace& ws, const ScalarField& f,
                                 double g0);

/// det(g0 + ddbar u) = e^{F + c} det(g0), mean-zero u, by damped Newton with
/// a preconditioned conjugate-gradient inner solve.
NewtonResult newton_ma(const SpectralWorkspace& ws, const HermitianField& g0,
                       const ScalarField& F, const NewtonConfig& cfg = {});

/// log det(g0 + ddbar u) - log det g0 - u + f = 0.
NewtonResult newton_aubin(const SpectralWorkspace& ws, const HermitianField& g0,
                          const ScalarField& f, const NewtonConfig& cfg = {});

enum class StationaryEquation {
  MongeAmpere,  ///< data = F; residual is sup |P(R)|, P dropping the grid mean
                ///< and the modes every derivative symbol annihilates
  Aubin,        ///< data = f
};

double residual_sup(const SpectralWorkspace& ws, const ScalarField& u,
                    StationaryEquation eq, const HermitianField& g0,
                    const ScalarField& data);

}  // namespace maflow
