#pragma once

#include <array>
#include <string_view>
#include <vector>

namespace maflow {

/// One time sample of every monitored quantity.
struct DiagnosticsRecord {
  double t = 0.0;
  double sup_abs_F = 0.0;  ///< sup |du/dt|
  double sup_F = 0.0;
  double inf_F = 0.0;
  double mean_F = 0.0;
  double osc_F = 0.0;      ///< sup F - inf F
  double energy_E = 0.0;   ///< 1/2 int phi^2 dV~, phi = F minus its dV~ mean
  double min_eig_gtilde = 0.0;
  double volume_gtilde = 0.0;
  double sup_S = 0.0;      ///< Calabi third-order quantity
  double trace_lo = 0.0;   ///< min over tr_{g0} g~ and tr_{g~} g0
  double trace_hi = 0.0;   ///< max over the same two traces
  double n_plus_lap_min = 0.0;  ///< min of n + Delta_{g0} u
  double sup_abs_u = 0.0;  ///< after mean normalization
  double pinch_lo = 0.0;   ///< extrema of the eigenvalues of g0^{-1} g~
  double pinch_hi = 0.0;
  double density_lo = 0.0;  ///< extrema of det(g~) / Omega
  double density_hi = 0.0;
};

inline constexpr std::array<std::string_view, 18> kDiagnosticsFields = {
    "t",          "sup_abs_F",  "sup_F",          "inf_F",
    "mean_F",     "osc_F",      "energy_E",       "min_eig_gtilde",
    "volume_gtilde", "sup_S",   "trace_lo",       "trace_hi",
    "n_plus_lap_min", "sup_abs_u", "pinch_lo",    "pinch_hi",
    "density_lo", "density_hi"};

/// Field values in kDiagnosticsFields order.
std::array<double, 18> to_array(const DiagnosticsRecord& r);
DiagnosticsRecord from_array(const std::array<double, 18>& v);

using DiagnosticsSeries = std::vector<DiagnosticsRecord>;

}  // namespace maflow
