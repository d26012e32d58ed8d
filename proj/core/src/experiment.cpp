#include "maflow/experiment.hpp"

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "maflow/checkpoint.hpp"
#include "maflow/elliptic.hpp"
#include "maflow/errors.hpp"

namespace maflow {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

// Timestamp plus pid plus a per-process counter; create_directory is the
// arbiter when several processes share the output root.
fs::path make_run_dir(const fs::path& root, const std::string& prefix, std::string& run_id) {
  static std::atomic<int> counter{0};
  fs::create_directories(root);
  for (int attempt = 0;; ++attempt) {
    std::ostringstream id;
    id << prefix << '-' << timestamp() << '-' << ::getpid() << '-' << counter++;
    const fs::path dir = root / id.str();
    if (fs::create_directory(dir)) {
      run_id = id.str();
      return dir;
    }
    if (attempt > 1000) throw std::runtime_error("cannot create a run directory under " + root.string());
  }
}

std::string checkpoint_name(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "checkpoint_t%012.6f.bin", t);
  return buf;
}

FlowProblem prepared_problem(const ExperimentConfig& cfg) {
  FlowProblem p = build_problem(cfg);
  if (p.variant == Variant::CalabiYau) p = gauge_fix(p);
  return p;
}

CheckReport gap_check(const std::string& name, double gap, double tol) {
  CheckReport r;
  r.name = name;
  r.margin = tol - gap;
  r.verdict = gap <= tol ? Verdict::Pass : Verdict::Fail;
  r.constants["gap"] = gap;
  r.constants["tolerance"] = tol;
  return r;
}

ScalarField minus_mean(ScalarField u) {
  const double m = u.mean();
  for (auto& v : u.values) v -= m;
  return u;
}

double sup_diff(const ScalarField& a, const ScalarField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

struct OracleSolution {
  ScalarField u;
  double c = 0.0;
  double residual = 0.0;
  int iterations = 0;
  std::string equation;
  bool mean_zero = true;
};

OracleSolution solve_oracle(const SpectralWorkspace& ws, const ExperimentConfig& cfg,
                            const FlowProblem& prob) {
  OracleSolution out;
  switch (prob.variant) {
    case Variant::CalabiYau: {
      if (prob.domain().n == 1) {
        const StationaryN1 s = solve_stationary_n1(ws, prob.f, prob.g0.entry(0, 0, 0).real());
        out.u = s.u;
        out.c = s.c;
        out.residual = s.residual;
        out.equation = "poisson_n1";
      } else {
        ScalarField F = prob.f;
        F *= -1.0;
        NewtonResult r = newton_ma(ws, prob.g0, F, cfg.newton);
        out.u = std::move(r.u);
        out.c = r.c;
        out.residual = r.residual_history.back();
        out.iterations = r.iterations;
        out.equation = "monge_ampere";
      }
      break;
    }
    case Variant::NegativeKE: {
      NewtonResult r = newton_aubin(ws, prob.g0, prob.f, cfg.newton);
      out.u = std::move(r.u);
      out.residual = r.residual_history.back();
      out.iterations = r.iterations;
      out.equation = "aubin";
      out.mean_zero = false;
      break;
    }
    case Variant::ReferenceFlow:
      throw std::invalid_argument("reference_flow has no stationary oracle");
  }
  return out;
}

CheckReport positivity_with_steps(const DiagnosticsSeries& s, double min_eig, double min_lap) {
  CheckReport r = check_positivity(s);
  r.constants["min_eig_accepted_steps"] = min_eig;
  r.constants["min_n_plus_lap_accepted_steps"] = min_lap;
  const double m = std::min(min_eig, min_lap);
  if (!(m > 0.0)) {
    r.verdict = Verdict::Fail;
    r.detail += (r.detail.empty() ? "" : "; ") + std::string("positivity lost at an accepted step");
  }
  r.margin = std::min(r.margin, m);
  return r;
}

void finish_exit_code(RunReport& rep) {
  if (rep.solver_failure) {
    rep.exit_code = kExitSolverFailure;
    return;
  }
  rep.exit_code = kExitPass;
  for (const auto& c : rep.checks)
    if (c.verdict == Verdict::Fail) rep.exit_code = kExitCheckFailure;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

json to_json(const CheckReport& c) {
  json constants = json::object();
  for (const auto& [k, v] : c.constants) constants[k] = number_or_null(v);
  return {{"name", c.name},
          {"verdict", to_string(c.verdict)},
          {"margin", number_or_null(c.margin)},
          {"constants", constants},
          {"detail", c.detail}};
}

json RunReport::to_json() const {
  json checks_json = json::array();
  for (const auto& c : checks) checks_json.push_back(maflow::to_json(c));
  json j;
  j["run_id"] = run_id;
  j["config_echo"] = config_echo;
  j["checks"] = checks_json;
  j["oracle_gap"] = oracle_gap ? number_or_null(*oracle_gap) : json(nullptr);
  j["termination"] = termination ? json(to_string(*termination)) : json(nullptr);
  j["message"] = message;
  j["kind"] = kind;
  j["wall_seconds"] = wall_seconds;
  j["steps"] = steps;
  j["rejected"] = rejected;
  j["final_t"] = final_t;
  j["exit_code"] = exit_code;
  if (uniqueness_gap) j["uniqueness_gap"] = number_or_null(*uniqueness_gap);
  if (class_T) j["class_T"] = std::isfinite(*class_T) ? json(*class_T) : json("inf");
  if (class_T_bisect)
    j["class_T_bisect"] = std::isfinite(*class_T_bisect) ? json(*class_T_bisect) : json("inf");
  return j;
}

double effective_sup_f(const ExperimentConfig& cfg) {
  return prepared_problem(cfg).f.sup_abs();
}

ScalarField band_limited_perturbation(const TorusDomain& d, double amplitude,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  std::vector<FourierMode> modes;
  const int dims = d.real_dims();
  std::array<int, 4> k{};
  // Odometer over the box [-2, 2]^dims, keeping one of each +-k pair. Wider
  // bands put the Hessian of a 1e-2 perturbation near 1 and break positivity.
  std::vector<int> lim(dims);
  for (int i = 0; i < dims; ++i) lim[i] = std::min(2, d.counts[i] / 3);
  for (int i = 0; i < dims; ++i) k[i] = -lim[i];
  while (true) {
    bool positive = false, zero = true;
    for (int i = 0; i < dims && zero; ++i) {
      if (k[i] != 0) {
        zero = false;
        positive = k[i] > 0;
      }
    }
    if (!zero && positive) {
      FourierMode m;
      m.k.assign(k.begin(), k.begin() + dims);
      m.amplitude = coef(rng);
      m.phase = phase(rng);
      modes.push_back(std::move(m));
    }
    int i = dims - 1;
    while (i >= 0 && k[i] == lim[i]) {
      k[i] = -lim[i];
      --i;
    }
    if (i < 0) break;
    ++k[i];
  }
  ScalarField u = build_modes(d, modes);
  const double s = u.sup_abs();
  if (s > 0.0) u *= amplitude / s;
  return u;
}

double bisect_existence_time(const ClassVector& a0, const ClassVector& b, double tol) {
  if (!(a0.min_eigenvalue() > 0.0)) throw std::invalid_argument("initial class is not positive");
  auto positive = [&](double t) { return class_at(t, a0, b).min_eigenvalue() > 0.0; };
  double lo = 0.0, hi = 1.0;
  while (positive(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e15) return std::numeric_limits<double>::infinity();
  }
  while (hi - lo > tol * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (positive(mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<CheckReport> series_checks(const ExperimentConfig& cfg,
                                       const DiagnosticsSeries& s) {
  std::vector<CheckReport> out;
  if (cfg.kind != "flow" || s.empty()) return out;
  // The bounds are in terms of sup|F| at the start, which is sup|f| only
  // for u0 = 0; perturbed or resumed series carry their own constant.
  const double sup_f = effective_sup_f(cfg);
  const double start = s.front().sup_abs_F;
  switch (cfg.variant) {
    case Variant::CalabiYau:
      out.push_back(check_max_principle(s, std::max(sup_f, start)));
      out.push_back(check_oscillation_contraction(s));
      out.push_back(check_energy_decay(s));
      out.push_back(check_volume_conservation(s));
      break;
    case Variant::NegativeKE:
      out.push_back(check_negative_ke_decay(s, std::max(sup_f, start * std::exp(s.front().t))));
      break;
    case Variant::ReferenceFlow:
      break;
  }
  out.push_back(check_metric_equivalence(s));
  out.push_back(check_zero_order(s));
  if (cfg.record_S) out.push_back(check_calabi_S_bounded(s));
  out.push_back(check_positivity(s));
  return out;
}

nlohmann::json run_oracle(const ExperimentConfig& cfg) {
  if (cfg.kind != "flow") throw std::invalid_argument("oracle needs a flow configuration");
  const FlowProblem prob = prepared_problem(cfg);
  SpectralWorkspace ws(prob.domain());
  const OracleSolution sol = solve_oracle(ws, cfg, prob);
  return {{"equation", sol.equation},
          {"residual", sol.residual},
          {"c", sol.c},
          {"sup_u", sol.u.sup_abs()},
          {"iterations", sol.iterations}};
}

RunReport run_experiment(const ExperimentConfig& cfg, const ExperimentOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  rep.kind = cfg.kind;
  rep.config_echo = to_json(cfg);
  if (!cfg.preset.empty()) {
    rep.config_echo["from_preset"] = cfg.preset;
    rep.config_echo["overridden"] = cfg.overridden;
  }
  const bool write = !opts.dry_run;
  const std::string prefix = cfg.preset.empty() ? std::string("custom") : cfg.preset;
  if (write) {
    rep.dir = make_run_dir(cfg.out_dir, prefix, rep.run_id);
    json echo = to_json(cfg);
    write_text(rep.dir / "config.json", echo.dump(2) + "\n");
  } else {
    rep.run_id = prefix + "-dry";
  }
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  auto finish = [&] {
    rep.wall_seconds = elapsed();
    finish_exit_code(rep);
    if (write) {
      write_diagnostics_csv(rep.dir / "diagnostics.csv", rep.records);
      write_text(rep.dir / "report.json", rep.to_json().dump(2) + "\n");
    }
    return rep;
  };

  if (cfg.kind == "class") {
    const double T = max_existence_time(*cfg.class_a0, *cfg.class_b);
    const double Tb = bisect_existence_time(*cfg.class_a0, *cfg.class_b);
    rep.class_T = T;
    rep.class_T_bisect = Tb;
    CheckReport c;
    c.name = "class_bisection";
    const double gap = (std::isinf(T) && std::isinf(Tb)) ? 0.0 : std::abs(T - Tb);
    c.margin = 1e-10 - gap;
    c.verdict = gap <= 1e-10 ? Verdict::Pass : Verdict::Fail;
    c.constants["T"] = T;
    c.constants["T_bisect"] = Tb;
    c.constants["gap"] = gap;
    rep.checks.push_back(c);
    if (write) {
      // Every run directory holds a checkpoint; for a class run it is the
      // trivial zero potential on the configured grid.
      write_checkpoint({0.0, ScalarField(cfg.domain())}, rep.dir / checkpoint_name(0.0));
    }
    return finish();
  }

  const FlowProblem prob = prepared_problem(cfg);
  SpectralWorkspace ws(prob.domain());

  RunOptions ro;
  ro.record_every = cfg.monitor_every;
  ro.record_S = cfg.record_S;
  ro.checkpoint_every = cfg.checkpoint_every;
  if (write) {
    ro.on_checkpoint = [&](const FlowState& s) {
      write_checkpoint({s.t, s.u}, rep.dir / checkpoint_name(s.t));
    };
  }
  if (opts.resume_from) {
    const Checkpoint ck = read_checkpoint(*opts.resume_from, prob.domain());
    FlowState st;
    st.t = ck.t;
    st.u = ck.u;
    ro.resume_from = st;
  } else if (cfg.perturbation > 0.0) {
    ro.initial_u = band_limited_perturbation(prob.domain(), cfg.perturbation, cfg.seed);
  }

  RunResult res = run(ws, prob, cfg.stepper, ro);
  rep.termination = res.termination;
  rep.message = res.message;
  rep.steps = res.steps;
  rep.rejected = res.rejected;
  rep.final_t = res.final_state.t;
  rep.records = res.records;
  rep.min_eig_accepted = res.min_eig_accepted;
  rep.min_n_plus_lap_accepted = res.min_n_plus_lap_accepted;
  rep.final_u = res.final_state.u;
  if (write) {
    write_checkpoint({res.final_state.t, res.final_state.u}, rep.dir / "checkpoint_final.bin");
  }
  rep.solver_failure = res.termination == Termination::StiffnessFailure ||
                       res.termination == Termination::DegenerateMetric;

  // Series checks, with positivity widened to every accepted step.
  for (auto& c : series_checks(cfg, rep.records)) {
    if (c.name == "positivity")
      c = positivity_with_steps(rep.records, res.min_eig_accepted, res.min_n_plus_lap_accepted);
    rep.checks.push_back(std::move(c));
  }

  CheckReport term;
  if (prob.variant == Variant::ReferenceFlow) {
    term.name = "reached_t_prime";
    const double target = std::min(cfg.stepper.t_end, cfg.t_prime);
    term.verdict = res.final_state.t >= target * (1.0 - 1e-12) ? Verdict::Pass : Verdict::Fail;
    term.margin = res.final_state.t - target;
  } else {
    term.name = "converged";
    term.verdict = res.termination == Termination::Converged ? Verdict::Pass : Verdict::Fail;
    term.margin = cfg.stepper.converge_tol - convergence_measure(res.final_state, prob);
  }
  term.constants["t_final"] = res.final_state.t;
  term.detail = to_string(res.termination);
  rep.checks.push_back(term);

  if (!rep.solver_failure && prob.variant != Variant::ReferenceFlow) {
    try {
      const OracleSolution sol = solve_oracle(ws, cfg, prob);
      const ScalarField u = sol.mean_zero ? minus_mean(res.final_state.u) : res.final_state.u;
      rep.oracle_gap = sup_diff(u, sol.u);
      CheckReport g = gap_check("oracle_gap", *rep.oracle_gap, cfg.oracle_tolerance);
      g.constants["oracle_residual"] = sol.residual;
      g.detail = sol.equation;
      rep.checks.push_back(g);
    } catch (const NonConvergence& e) {
      rep.solver_failure = true;
      rep.message += (rep.message.empty() ? "" : "; ") + std::string("oracle: ") + e.what();
    }
  }

  if (cfg.uniqueness_pair && !rep.solver_failure) {
    // Partner run from the zero potential.
    RunOptions zero;
    zero.record_every = cfg.monitor_every;
    zero.record_S = false;
    const RunResult other = run(ws, prob, cfg.stepper, zero);
    if (other.termination == Termination::StiffnessFailure ||
        other.termination == Termination::DegenerateMetric) {
      rep.solver_failure = true;
      rep.message += "; partner run: " + other.message;
    } else {
      rep.uniqueness_gap = sup_diff(res.final_state.u, other.final_state.u);
      CheckReport g = gap_check("uniqueness", *rep.uniqueness_gap, cfg.oracle_tolerance);
      g.constants["partner_t_final"] = other.final_state.t;
      g.detail = "partner " + to_string(other.termination);
      rep.checks.push_back(g);
    }
  }
  return finish();
}

void write_diagnostics_csv(const fs::path& path, const DiagnosticsSeries& s) {
  std::string text;
  for (std::size_t i = 0; i < kDiagnosticsFields.size(); ++i) {
    if (i) text += ',';
    text += kDiagnosticsFields[i];
  }
  text += '\n';
  char buf[40];
  for (const auto& r : s) {
    const auto v = to_array(r);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) text += ',';
      std::snprintf(buf, sizeof buf, "%.17g", v[i]);
      text += buf;
    }
    text += '\n';
  }
  write_text(path, text);
}

DiagnosticsSeries read_diagnostics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty diagnostics file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() != kDiagnosticsFields.size())
    throw std::runtime_error("diagnostics header has " + std::to_string(header.size()) +
                             " columns, expected " + std::to_string(kDiagnosticsFields.size()));
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] != kDiagnosticsFields[i])
      throw std::runtime_error("unexpected diagnostics column \"" + header[i] + "\"");
  DiagnosticsSeries out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::array<double, 18> v{};
    std::stringstream ss(line);
    std::string cell;
    std::size_t i = 0;
    while (std::getline(ss, cell, ',')) {
      if (i >= v.size()) throw std::runtime_error("too many columns on row " + std::to_string(row));
      char* end = nullptr;
      v[i] = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw std::runtime_error("bad number on row " + std::to_string(row));
      ++i;
    }
    if (i != v.size()) throw std::runtime_error("too few columns on row " + std::to_string(row));
    out.push_back(from_array(v));
  }
  return out;
}

}  // namespace maflow
