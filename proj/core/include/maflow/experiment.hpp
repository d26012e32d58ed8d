#pragma once

// Batch driver: one experiment per call, writing into a fresh run directory
//
//   <out>/<run_id>/config.json        resolved configuration (re-parseable)
//   <out>/<run_id>/diagnostics.csv    one row per monitor record
//   <out>/<run_id>/report.json        checks, oracle gap, termination
//   <out>/<run_id>/checkpoint_*.bin   periodic and final checkpoints
//
// Exit codes: 0 all checks pass, 2 a check failed, 3 solver failure,
// 4 configuration error.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maflow/config.hpp"
#include "maflow/monitor.hpp"

namespace maflow {

inline constexpr int kExitPass = 0;
inline constexpr int kExitCheckFailure = 2;
inline constexpr int kExitSolverFailure = 3;
inline constexpr int kExitConfigError = 4;

struct RunReport {
  std::string run_id;
  std::filesystem::path dir;
  std::string kind;
  std::optional<Termination> termination;  ///< flow runs only
  std::string message;
  std::optional<double> oracle_gap;
  std::optional<double> uniqueness_gap;
  std::optional<double> class_T;         ///< class runs: max_existence_time
  std::optional<double> class_T_bisect;  ///< independent bisection
  std::vector<CheckReport> checks;
  double wall_seconds = 0.0;
  long steps = 0;
  long rejected = 0;
  double final_t = 0.0;
  double min_eig_accepted = 0.0;
  double min_n_plus_lap_accepted = 0.0;
  int exit_code = kExitPass;
  bool solver_failure = false;
  nlohmann::json config_echo;

  // In-memory extras, not serialized.
  DiagnosticsSeries records;
  std::optional<ScalarField> final_u;

  nlohmann::json to_json() const;
};

struct ExperimentOptions {
  /// Continue from this checkpoint instead of t = 0.
  std::optional<std::filesystem::path> resume_from;
  /// Write nothing to disk (tests, benchmarks).
  bool dry_run = false;
};

/// Runs the configured experiment. Never throws for solver trouble: failures
/// land in the report (exit code 3) after partial outputs are written.
RunReport run_experiment(const ExperimentConfig& cfg, const ExperimentOptions& opts = {});

/// Stationary solve only. Returns {equation, residual, c, sup_u, iterations}.
/// Throws NonConvergence or std::invalid_argument for variants without one.
nlohmann::json run_oracle(const ExperimentConfig& cfg);

/// Re-runs every series-based monitor for this config on a stored series.
std::vector<CheckReport> series_checks(const ExperimentConfig& cfg,
                                       const DiagnosticsSeries& series);

/// sup|f| after the gauge normalization the flow actually uses.
double effective_sup_f(const ExperimentConfig& cfg);

/// Random band-limited field (|k| <= 2 per direction) with sup
/// norm `amplitude`, deterministic in seed.
ScalarField band_limited_perturbation(const TorusDomain& d, double amplitude,
                                      std::uint64_t seed);

/// sup{t : A0 - tB > 0} by bisection on the smallest eigenvalue.
double bisect_existence_time(const ClassVector& a0, const ClassVector& b,
                             double tol = 1e-13);

void write_diagnostics_csv(const std::filesystem::path& path, const DiagnosticsSeries& s);
/// Throws std::runtime_error on a malformed header or row.
DiagnosticsSeries read_diagnostics_csv(const std::filesystem::path& path);

nlohmann::json to_json(const CheckReport& c);

}  // namespace maflow
