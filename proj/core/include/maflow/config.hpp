#pragma once

// Experiment configuration: a JSON document of key/value pairs, optionally
// starting from a named preset. Keys given explicitly override the preset.
//
//   preset            one of preset_names()
//   kind              "flow" (default) or "class"
//   variant           "calabi_yau" | "negative_ke" | "reference_flow"
//   n                 complex dimension, 1 or 2
//   grid              int or list of 2n ints, powers of two >= 8
//   periods           number or list of 2n numbers
//   background        Hermitian matrix (rows; entries number or [re, im])
//   f                 list of {"k": [2n ints], "amplitude": a, "phase": p}
//                     giving f = sum a cos(2 pi sum_d k_d x_d / L_d + p)
//   omega0, eta       Hermitian matrices (reference_flow)
//   t_prime           T' > 0 (reference_flow)
//   omega_density     {"scale": s, "modes": [...]}: Omega = s exp(sum modes)
//   stepper           {dt_initial, safety, dt_max, tolerance, dealias,
//                      max_steps, t_end, converge_tol, stability_factor}
//   newton            {max_iterations, tolerance}
//   monitor_every     record cadence in time units
//   record_S          compute the third-order quantity in every record
//   checkpoint_every  periodic checkpoint interval (0 = final only)
//   seed              RNG seed for the perturbed start
//   perturbation      amplitude of a random band-limited initial u
//   uniqueness_pair   also run from u0 = 0 and compare the limits
//   oracle_tolerance  allowed sup-norm gap between flow limit and oracle
//   class             {"A0": matrix, "B": matrix} (kind = class)
//   out               output root directory

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maflow/class_tracker.hpp"
#include "maflow/elliptic.hpp"
#include "maflow/flow.hpp"

namespace maflow {

/// Every validation problem found, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const noexcept { return errors_; }

 private:
  std::vector<std::string> errors_;
};

struct FourierMode {
  std::vector<int> k;  ///< one integer wavenumber per real direction
  double amplitude = 0.0;
  double phase = 0.0;
};

struct ExperimentConfig {
  std::string preset;  ///< empty when fully explicit
  std::string kind = "flow";
  Variant variant = Variant::CalabiYau;
  int n = 1;
  std::vector<int> grid{64, 64};
  std::vector<double> periods{1.0, 1.0};
  PointMatrix background = PointMatrix::identity(1);
  std::vector<FourierMode> f_modes;
  PointMatrix omega0 = PointMatrix::identity(1);
  PointMatrix eta = PointMatrix::identity(1);
  double t_prime = 1.0;
  double omega_scale = 1.0;
  std::vector<FourierMode> omega_modes;
  StepperConfig stepper;
  NewtonConfig newton;
  double monitor_every = 0.02;
  bool record_S = true;
  double checkpoint_every = 0.0;
  std::uint64_t seed = 1;
  double perturbation = 0.0;
  bool uniqueness_pair = false;
  double oracle_tolerance = 1e-6;
  std::optional<ClassVector> class_a0;
  std::optional<ClassVector> class_b;
  std::string out_dir = "runs";
  std::vector<std::string> overridden;  ///< explicit keys that replaced preset values

  TorusDomain domain() const;
};

std::vector<std::string> preset_names();
/// Throws ConfigError for unknown names.
ExperimentConfig preset(const std::string& name);

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig parse_config(const nlohmann::json& doc);
inline ExperimentConfig parse_config(const char* text) { return parse_config(std::string(text)); }

/// Fully explicit JSON form; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const ExperimentConfig& c);

ScalarField build_modes(const TorusDomain& d, const std::vector<FourierMode>& modes);
/// Flow problem for a flow-kind config (gauge fix not applied).
FlowProblem build_problem(const ExperimentConfig& c);

}  // namespace maflow
