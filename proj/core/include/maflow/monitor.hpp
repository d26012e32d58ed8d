#pragma once

// Records a-priori estimate quantities along a flow and checks the shape of
// each estimate (boundedness, monotonicity, exponential rate) on a recorded
// series. The estimate constants themselves are non-constructive; checks
// report fitted constants instead of asserting any.

#include <map>
#include <optional>
#include <string>

#include "maflow/diagnostics.hpp"
#include "maflow/flow.hpp"

namespace maflow {

enum class Verdict { Pass, Fail, Indeterminate };
std::string to_string(Verdict v);

struct CheckReport {
  std::string name;
  Verdict verdict = Verdict::Indeterminate;
  double margin = 0.0;  ///< signed slack of the tightest constraint (>= 0 passes)
  std::map<std::string, double> constants;
  std::string detail;

  bool passed() const { return verdict == Verdict::Pass; }
};

/// Log-linear least-squares fit y ~ C e^{-a t} on [t_a, t_b].
struct DecayFit {
  double t_a = 0.0;
  double t_b = 0.0;
  double rate = 0.0;       ///< a
  double amplitude = 0.0;  ///< C
  double residual = 0.0;   ///< RMS residual of log y
  int samples = 0;
};

/// Fits over samples with y > floor and t in [t_lo, t_hi]. Returns nullopt
/// with fewer than two usable samples.
std::optional<DecayFit> fit_exponential(const std::vector<double>& t,
                                        const std::vector<double>& y,
                                        double floor, double t_lo, double t_hi);

DiagnosticsRecord snapshot(const SpectralWorkspace& ws, const FlowState& state,
                           const FlowProblem& prob, bool with_S = true);

/// sup_abs_F must never exceed sup|f| + 1e-8 nor grow by more than 1e-9
/// between consecutive records.
CheckReport check_max_principle(const DiagnosticsSeries& s, double sup_f);

/// Resamples log(osc_F) with monotone cubic interpolation at spacing `unit`
/// (default: one time unit, shortened to a quarter of the span for short
/// runs) and checks the per-unit-time contraction factor.
CheckReport check_oscillation_contraction(const DiagnosticsSeries& s,
                                          double unit = 0.0);

/// Energy nonincreasing (1e-10 slack) after the first record with osc_F < 1/2.
CheckReport check_energy_decay(const DiagnosticsSeries& s);

/// sup_abs_F <= sup|f| e^{-t} + 1e-8 and fitted log-slope <= -0.9 on the
/// window [t_a, t_b].
CheckReport check_negative_ke_decay(const DiagnosticsSeries& s, double sup_f,
                                    double t_a = 2.0, double t_b = 8.0);

/// Smallest C with 1/C <= pinch, density ratio <= C across the series;
/// passes when C is finite and at most `bound`.
CheckReport check_metric_equivalence(const DiagnosticsSeries& s, double bound = 10.0);

/// sup_abs_u bounded by 10x its maximum over the first quarter of the run.
CheckReport check_zero_order(const DiagnosticsSeries& s);

/// sup_S(t) <= 10 (sup_S(0) + 1).
CheckReport check_calabi_S_bounded(const DiagnosticsSeries& s);

/// Relative drift of volume_gtilde across the series <= tol.
CheckReport check_volume_conservation(const DiagnosticsSeries& s,
                                      double tol = 1e-6);

/// min_eig_gtilde > 0 and n + Delta u > 0 in every record.
CheckReport check_positivity(const DiagnosticsSeries& s);

}  // namespace maflow
