#pragma once

// Parabolic complex Monge-Ampere flows for a Kahler potential on a flat
// torus, integrated with an explicit embedded Runge-Kutta 4(3) pair.
//
//   CalabiYau      du/dt = log det(g0 + ddbar u) - log det g0 + f
//   NegativeKE     du/dt = log det(g0 + ddbar u) - log det g0 - u + f
//   ReferenceFlow  dphi/dt = log( det(w_t + ddbar phi) / Omega ),
//                  w_t = ((T' - t) w0 + t eta) / T'

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "maflow/diagnostics.hpp"
#include "maflow/spectral.hpp"
#include "maflow/torus_geometry.hpp"

namespace maflow {

enum class Variant { CalabiYau, NegativeKE, ReferenceFlow };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct ReferenceData {
  HermitianField omega0;
  HermitianField eta;
  double t_prime = 1.0;
  ScalarField omega_density;  ///< Omega, positive
};

struct FlowProblem {
  Variant variant = Variant::CalabiYau;
  HermitianField g0;  ///< background; equals omega0 for ReferenceFlow
  ScalarField f;      ///< zero field for ReferenceFlow
  std::optional<ReferenceData> reference;
  double gauge_shift = 0.0;  ///< constant removed from f by gauge_fix

  static FlowProblem calabi_yau(HermitianField g0, ScalarField f);
  static FlowProblem negative_ke(HermitianField g0, ScalarField f);
  static FlowProblem reference_flow(HermitianField omega0, HermitianField eta,
                                    double t_prime, ScalarField omega_density);

  const TorusDomain& domain() const { return g0.domain; }
  /// Rejects inconsistent domains, non-metric backgrounds and bad T'.
  void validate() const;
};

struct FlowState {
  double t = 0.0;
  ScalarField u;            ///< the potential (phi for ReferenceFlow)
  HermitianField g_tilde;   ///< background + ddbar u
  ScalarField F;            ///< du/dt at (t, u)
  double dt_next = 0.0;     ///< step size suggested by the controller
};

struct StepperConfig {
  double dt_initial = 1e-4;
  double safety = 0.9;
  double dt_max = 0.05;
  double tolerance = 1e-8;  ///< sup-norm bound on the embedded error estimate
  bool dealias = true;
  long max_steps = 5'000'000;
  double t_end = 50.0;
  double converge_tol = 1e-8;
  /// dt <= stability_factor / rho with rho the spectral radius of the
  /// frozen-coefficient linearization; 0 disables the cap. Explicit RK4 is
  /// stable on the negative real axis up to about 2.78.
  double stability_factor = 2.5;

  void validate() const;
};

enum class Termination { Converged, TimeLimit, StiffnessFailure, DegenerateMetric };
std::string to_string(Termination t);

/// dt dropped below 1e-12 while steps kept being rejected.
class StiffnessFailure : public std::runtime_error {
 public:
  StiffnessFailure(const std::string& what, DiagnosticsRecord record)
      : std::runtime_error(what), record_(record) {}
  const DiagnosticsRecord& record() const noexcept { return record_; }

 private:
  DiagnosticsRecord record_;
};

/// Embedded pair (Zonneveld 4(3)): classical RK4 weights propagate the
/// solution, the third-order weights only feed the error estimate.
struct ButcherTableau {
  static constexpr int stages = 5;
  double c[stages];
  double a[stages][stages];
  double b[stages];      // order 4
  double b_hat[stages];  // order 3
};
const ButcherTableau& embedded_pair();

ScalarField rhs_calabi_yau(const SpectralWorkspace& ws, const ScalarField& u,
                           const FlowProblem& prob, bool dealias = true);
ScalarField rhs_negative_ke(const SpectralWorkspace& ws, const ScalarField& u,
                            const FlowProblem& prob, bool dealias = true);
ScalarField rhs_reference(const SpectralWorkspace& ws, const ScalarField& phi,
                          double t, const FlowProblem& prob, bool dealias = true);

/// w_t on [0, T']; throws std::domain_error outside.
HermitianField reference_form(double t, const FlowProblem& prob);

/// The metric that u perturbs at time t (g0, or w_t for ReferenceFlow).
HermitianField background_at(double t, const FlowProblem& prob);

/// CalabiYau only: f <- f - log(mean e^f) so that int e^f dV = Vol.
FlowProblem gauge_fix(const FlowProblem& prob);

/// Evaluates g~ and F at (t, u); throws DegenerateMetric on positivity loss.
FlowState make_state(const SpectralWorkspace& ws, double t, ScalarField u,
                     const FlowProblem& prob, bool dealias);

/// One accepted adaptive step starting from state.dt_next (or
/// cfg.dt_initial when unset). Rejected attempts halve dt on positivity loss
/// and shrink it on error-estimate excess.
FlowState step(const SpectralWorkspace& ws, const FlowState& state,
               const FlowProblem& prob, const StepperConfig& cfg);

/// Bound on the spectral radius of v -> g~^{i jbar} d_i d_jbar v (+1 for
/// NegativeKE) over the resolved modes at `state`.
double linearized_spectral_radius(const SpectralWorkspace& ws, const FlowState& state,
                                  const FlowProblem& prob, bool dealias);

/// One RK4 step of exactly dt with no error control.
FlowState step_fixed(const SpectralWorkspace& ws, const FlowState& state,
                     const FlowProblem& prob, double dt, bool dealias);

/// sup |F - mean F|, or sup |F| for NegativeKE whose stationary slope is 0.
double convergence_measure(const FlowState& state, const FlowProblem& prob);

struct RunOptions {
  double record_every = 0.05;
  bool record_S = true;
  std::optional<ScalarField> initial_u;  ///< perturbed start; default u = 0
  std::optional<FlowState> resume_from;
  double checkpoint_every = 0.0;  ///< 0 disables periodic checkpoints
  std::function<void(const FlowState&)> on_checkpoint;
  std::function<void(const FlowState&, const DiagnosticsRecord&)> on_record;
};

struct RunResult {
  FlowState final_state;
  DiagnosticsSeries records;
  Termination termination = Termination::TimeLimit;
  std::string message;
  long steps = 0;
  long rejected = 0;
  /// Extremes over every accepted step (not only recorded ones).
  double min_eig_accepted = 0.0;
  double min_n_plus_lap_accepted = 0.0;
};

RunResult run(const SpectralWorkspace& ws, const FlowProblem& prob,
              const StepperConfig& cfg, const RunOptions& opts = {});

}  // namespace maflow
