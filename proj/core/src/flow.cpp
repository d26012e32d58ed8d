#include "maflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "maflow/errors.hpp"
#include "maflow/monitor.hpp"

namespace maflow {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::CalabiYau: return "calabi_yau";
    case Variant::NegativeKE: return "negative_ke";
    case Variant::ReferenceFlow: return "reference_flow";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& s) {
  if (s == "calabi_yau") return Variant::CalabiYau;
  if (s == "negative_ke") return Variant::NegativeKE;
  if (s == "reference_flow") return Variant::ReferenceFlow;
  throw std::invalid_argument("unknown flow variant '" + s + "'");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "Converged";
    case Termination::TimeLimit: return "TimeLimit";
    case Termination::StiffnessFailure: return "StiffnessFailure";
    case Termination::DegenerateMetric: return "DegenerateMetric";
  }
  return "unknown";
}

// ---------------------------------------------------------------- problems

FlowProblem FlowProblem::calabi_yau(HermitianField g0, ScalarField f) {
  FlowProblem p;
  p.variant = Variant::CalabiYau;
  p.g0 = std::move(g0);
  p.f = std::move(f);
  p.validate();
  return p;
}

FlowProblem FlowProblem::negative_ke(HermitianField g0, ScalarField f) {
  FlowProblem p;
  p.variant = Variant::NegativeKE;
  p.g0 = std::move(g0);
  p.f = std::move(f);
  p.validate();
  return p;
}

FlowProblem FlowProblem::reference_flow(HermitianField omega0, HermitianField eta,
                                        double t_prime, ScalarField omega_density) {
  FlowProblem p;
  p.variant = Variant::ReferenceFlow;
  p.g0 = omega0;
  p.f = ScalarField(omega0.domain);
  p.reference = ReferenceData{std::move(omega0), std::move(eta), t_prime,
                              std::move(omega_density)};
  p.validate();
  return p;
}

void FlowProblem::validate() const {
  if (!g0.metric) throw std::invalid_argument("background must be a metric");
  if (!(f.domain == g0.domain)) throw DomainMismatch("f and g0 domains differ");
  if (variant != Variant::ReferenceFlow) return;
  if (!reference) throw std::invalid_argument("reference flow needs w0, eta, T', Omega");
  const auto& r = *reference;
  if (!(r.t_prime > 0.0)) throw std::invalid_argument("T' must be positive");
  if (!(r.eta.domain == g0.domain) || !(r.omega_density.domain == g0.domain)) {
    throw DomainMismatch("reference data domains differ");
  }
  if (r.omega_density.min() <= 0.0) {
    throw std::invalid_argument("Omega must be a positive density");
  }
}

void StepperConfig::validate() const {
  if (!(dt_initial > 0.0) || !(dt_max > 0.0)) {
    throw std::invalid_argument("dt bounds must be positive");
  }
  if (!(safety > 0.0 && safety <= 1.0)) {
    throw std::invalid_argument("safety factor must lie in (0, 1]");
  }
  if (!(tolerance > 0.0) || !(converge_tol > 0.0)) {
    throw std::invalid_argument("tolerances must be positive");
  }
  if (!(stability_factor >= 0.0)) {
    throw std::invalid_argument("stability factor must be >= 0");
  }
}

const ButcherTableau& embedded_pair() {
  static const ButcherTableau tab = {
      {0.0, 0.5, 0.5, 1.0, 0.75},
      {{0, 0, 0, 0, 0},
       {0.5, 0, 0, 0, 0},
       {0, 0.5, 0, 0, 0},
       {0, 0, 1.0, 0, 0},
       {5.0 / 32, 7.0 / 32, 13.0 / 32, -1.0 / 32, 0}},
      {1.0 / 6, 1.0 / 3, 1.0 / 3, 1.0 / 6, 0.0},
      {-0.5, 7.0 / 3, 7.0 / 3, 13.0 / 6, -16.0 / 3}};
  return tab;
}

// ---------------------------------------------------------------- rhs

HermitianField reference_form(double t, const FlowProblem& prob) {
  if (!prob.reference) throw std::invalid_argument("not a reference flow");
  const auto& r = *prob.reference;
  if (t < 0.0 || t > r.t_prime) {
    std::ostringstream msg;
    msg << "reference form requested at t=" << t << " outside [0, " << r.t_prime << "]";
    throw std::domain_error(msg.str());
  }
  if (t == 0.0) return r.omega0;
  if (t == r.t_prime) return r.eta;
  const double a = (r.t_prime - t) / r.t_prime;
  const double b = t / r.t_prime;
  HermitianField w(r.omega0.domain);
  for (std::size_t k = 0; k < w.data.size(); ++k)
    w.data[k] = a * r.omega0.data[k] + b * r.eta.data[k];
  w.resymmetrize();
  bool positive = true;
  for (std::size_t p = 0; p < w.points() && positive; ++p)
    positive = eigen_extrema(w.at(p)).first > 0.0;
  w.metric = positive;
  return w;
}

HermitianField background_at(double t, const FlowProblem& prob) {
  return prob.variant == Variant::ReferenceFlow ? reference_form(t, prob) : prob.g0;
}

namespace {

struct Evaluation {
  HermitianField g_tilde;
  ScalarField F;
};

// g~ = background + ddbar u with a pointwise positivity check, and the
// flow's right-hand side at (t, u).
Evaluation evaluate(const SpectralWorkspace& ws, double t, const ScalarField& u,
                    const FlowProblem& prob, bool dealias_rhs) {
  const HermitianField bg = background_at(t, prob);
  if (prob.variant == Variant::ReferenceFlow && !bg.metric) {
    throw DegenerateMetric("reference form lost positivity", 0,
                           min_eigenvalue_field(bg).min());
  }
  HermitianField gt = bg;
  const HermitianField h = complex_hessian(ws, u);
  // Both terms are Hermitian by construction, so no resymmetrize here.
  for (std::size_t k = 0; k < gt.data.size(); ++k) gt.data[k] += h.data[k];

  ScalarField F(u.domain);
  for (std::size_t p = 0; p < gt.points(); ++p) {
    const PointMatrix m = gt.at(p);
    const double lo = eigen_extrema(m).first;
    if (!(lo > 0.0)) {
      std::ostringstream msg;
      msg << "g~ not positive definite at grid point " << p
          << " (min eigenvalue " << lo << ")";
      throw DegenerateMetric(msg.str(), p, lo);
    }
    const double ref = prob.variant == Variant::ReferenceFlow
                           ? prob.reference->omega_density[p]
                           : det(bg.at(p));
    F[p] = std::log(det(m) / ref);
    if (prob.variant != Variant::ReferenceFlow) F[p] += prob.f[p];
    if (prob.variant == Variant::NegativeKE) F[p] -= u[p];
  }
  gt.metric = true;
  if (dealias_rhs) F = dealias(ws, F);
  return {std::move(gt), std::move(F)};
}

}  // namespace

ScalarField rhs_calabi_yau(const SpectralWorkspace& ws, const ScalarField& u,
                           const FlowProblem& prob, bool dealias) {
  FlowProblem p = prob;
  p.variant = Variant::CalabiYau;
  return evaluate(ws, 0.0, u, p, dealias).F;
}

ScalarField rhs_negative_ke(const SpectralWorkspace& ws, const ScalarField& u,
                            const FlowProblem& prob, bool dealias) {
  FlowProblem p = prob;
  p.variant = Variant::NegativeKE;
  return evaluate(ws, 0.0, u, p, dealias).F;
}

ScalarField rhs_reference(const SpectralWorkspace& ws, const ScalarField& phi,
                          double t, const FlowProblem& prob, bool dealias) {
  if (prob.variant != Variant::ReferenceFlow) {
    throw std::invalid_argument("rhs_reference needs a reference-flow problem");
  }
  return evaluate(ws, t, phi, prob, dealias).F;
}

FlowProblem gauge_fix(const FlowProblem& prob) {
  if (prob.variant != Variant::CalabiYau) {
    throw std::invalid_argument("gauge_fix applies to the Calabi-Yau flow only");
  }
  FlowProblem out = prob;
  const ScalarField dV = det_field(prob.g0);
  ScalarField ef = prob.f;
  for (double& v : ef.values) v = std::exp(v);
  const double shift = std::log(integrate(ef, dV) / integrate(dV));
  out.f += -shift;
  out.gauge_shift = prob.gauge_shift + shift;
  return out;
}

FlowState make_state(const SpectralWorkspace& ws, double t, ScalarField u,
                     const FlowProblem& prob, bool dealias) {
  Evaluation e = evaluate(ws, t, u, prob, dealias);
  FlowState s;
  s.t = t;
  s.u = std::move(u);
  s.g_tilde = std::move(e.g_tilde);
  s.F = std::move(e.F);
  return s;
}

// ---------------------------------------------------------------- stepping

namespace {

// Stage slopes for one attempt of size dt; k[0] is the cached F.
std::vector<ScalarField> stage_slopes(const SpectralWorkspace& ws,
                                      const FlowState& s, const FlowProblem& prob,
                                      double dt, bool dealias, int stages) {
  const auto& tab = embedded_pair();
  std::vector<ScalarField> k;
  k.reserve(stages);
  k.push_back(s.F);
  for (int i = 1; i < stages; ++i) {
    ScalarField y = s.u;
    for (int j = 0; j < i; ++j) {
      const double c = dt * tab.a[i][j];
      if (c == 0.0) continue;
      for (std::size_t p = 0; p < y.size(); ++p) y[p] += c * k[j][p];
    }
    k.push_back(evaluate(ws, s.t + tab.c[i] * dt, y, prob, dealias).F);
  }
  return k;
}

ScalarField combine(const ScalarField& u, const std::vector<ScalarField>& k,
                    const double* weights, double dt) {
  ScalarField y = u;
  for (std::size_t j = 0; j < k.size(); ++j) {
    const double c = dt * weights[j];
    if (c == 0.0) continue;
    for (std::size_t p = 0; p < y.size(); ++p) y[p] += c * k[j][p];
  }
  return y;
}

}  // namespace

FlowState step_fixed(const SpectralWorkspace& ws, const FlowState& state,
                     const FlowProblem& prob, double dt, bool dealias) {
  const auto& tab = embedded_pair();
  const auto k = stage_slopes(ws, state, prob, dt, dealias, 4);
  FlowState next = make_state(ws, state.t + dt, combine(state.u, k, tab.b, dt),
                              prob, dealias);
  next.dt_next = dt;
  return next;
}

double linearized_spectral_radius(const SpectralWorkspace& ws, const FlowState& state,
                                  const FlowProblem& prob, bool dealias) {
  // |symbol| <= lambda_max(g~^{-1}) |zeta|^2, |zeta|^2 = sum k^2 / 4.
  const TorusDomain& d = ws.domain();
  double k2 = 0.0;
  for (int dir = 0; dir < d.real_dims(); ++dir) {
    int kmax = d.counts[dir] / 2 - 1;
    if (dealias) {
      while (kmax > 0 && !SpectralWorkspace::in_dealias_band(kmax, d.counts[dir])) --kmax;
    }
    const double k = 2.0 * std::numbers::pi * kmax / d.periods[dir];
    k2 += k * k;
  }
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < state.g_tilde.points(); ++p)
    lo = std::min(lo, eigen_extrema(state.g_tilde.at(p)).first);
  double rho = 0.25 * k2 / lo;
  if (prob.variant == Variant::NegativeKE) rho += 1.0;
  return rho;
}

FlowState step(const SpectralWorkspace& ws, const FlowState& state,
               const FlowProblem& prob, const StepperConfig& cfg) {
  const auto& tab = embedded_pair();
  constexpr double kDtFloor = 1e-12;
  double dt = state.dt_next > 0.0 ? state.dt_next : cfg.dt_initial;
  double dt_cap = cfg.dt_max;
  if (cfg.stability_factor > 0.0) {
    dt_cap = std::min(dt_cap, cfg.stability_factor /
                                  linearized_spectral_radius(ws, state, prob, cfg.dealias));
  }
  dt = std::min(dt, dt_cap);
  if (prob.variant == Variant::ReferenceFlow) {
    dt = std::min(dt, prob.reference->t_prime - state.t);
  }

  while (true) {
    if (dt < kDtFloor) {
      std::ostringstream msg;
      msg << "step size underflow at t=" << state.t << " (dt=" << dt << ")";
      throw StiffnessFailure(msg.str(), snapshot(ws, state, prob, false));
    }
    std::vector<ScalarField> k;
    try {
      k = stage_slopes(ws, state, prob, dt, cfg.dealias, ButcherTableau::stages);
    } catch (const DegenerateMetric&) {
      dt *= 0.5;
      continue;
    }
    ScalarField y = combine(state.u, k, tab.b, dt);
    double err = 0.0;
    for (std::size_t p = 0; p < y.size(); ++p) {
      double e = 0.0;
      for (int j = 0; j < ButcherTableau::stages; ++j)
        e += (tab.b[j] - tab.b_hat[j]) * k[j][p];
      err = std::max(err, std::abs(dt * e));
    }
    const double ratio = err / cfg.tolerance;
    if (ratio > 1.0 || !std::isfinite(ratio)) {
      const double shrink =
          std::isfinite(ratio) ? std::max(0.2, cfg.safety * std::pow(ratio, -0.25)) : 0.2;
      dt *= shrink;
      continue;
    }
    FlowState next;
    try {
      next = make_state(ws, state.t + dt, std::move(y), prob, cfg.dealias);
    } catch (const DegenerateMetric&) {
      dt *= 0.5;
      continue;
    }
    const double grow =
        ratio > 0.0 ? std::min(5.0, cfg.safety * std::pow(ratio, -0.25)) : 5.0;
    next.dt_next = std::min(dt_cap, dt * std::max(0.2, grow));
    return next;
  }
}

double convergence_measure(const FlowState& state, const FlowProblem& prob) {
  if (prob.variant == Variant::NegativeKE) return state.F.sup_abs();
  const double m = state.F.mean();
  double worst = 0.0;
  for (double v : state.F.values) worst = std::max(worst, std::abs(v - m));
  return worst;
}

// ---------------------------------------------------------------- run loop

RunResult run(const SpectralWorkspace& ws, const FlowProblem& prob,
              const StepperConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  prob.validate();
  RunResult res;
  double t_end = cfg.t_end;
  if (prob.variant == Variant::ReferenceFlow) {
    t_end = std::min(t_end, prob.reference->t_prime);
  }

  auto record = [&](const FlowState& s) {
    DiagnosticsRecord r = snapshot(ws, s, prob, opts.record_S);
    res.records.push_back(r);
    if (opts.on_record) opts.on_record(s, r);
  };
  auto accept_extremes = [&](const FlowState& s) {
    res.min_eig_accepted =
        std::min(res.min_eig_accepted, min_eigenvalue_field(s.g_tilde).min());
    res.min_n_plus_lap_accepted = std::min(
        res.min_n_plus_lap_accepted,
        trace_pair(s.g_tilde, background_at(s.t, prob)).min());
  };

  FlowState state;
  try {
    if (opts.resume_from) {
      state = make_state(ws, opts.resume_from->t, opts.resume_from->u, prob,
                         cfg.dealias);
    } else {
      ScalarField u0 = opts.initial_u ? *opts.initial_u : ScalarField(prob.domain());
      state = make_state(ws, 0.0, std::move(u0), prob, cfg.dealias);
    }
  } catch (const DegenerateMetric& e) {
    res.termination = Termination::DegenerateMetric;
    res.message = e.what();
    FlowState s;
    s.t = opts.resume_from ? opts.resume_from->t : 0.0;
    s.u = opts.resume_from ? opts.resume_from->u
                           : (opts.initial_u ? *opts.initial_u : ScalarField(prob.domain()));
    res.final_state = std::move(s);
    return res;
  }
  state.dt_next = opts.resume_from && opts.resume_from->dt_next > 0.0
                      ? opts.resume_from->dt_next
                      : cfg.dt_initial;
  res.min_eig_accepted = min_eigenvalue_field(state.g_tilde).min();
  res.min_n_plus_lap_accepted =
      trace_pair(state.g_tilde, background_at(state.t, prob)).min();
  record(state);

  const double cadence = opts.record_every > 0.0 ? opts.record_every : 0.0;
  double next_record = state.t + cadence;
  double next_checkpoint =
      opts.checkpoint_every > 0.0 ? state.t + opts.checkpoint_every : INFINITY;
  bool last_recorded = true;

  while (true) {
    if (convergence_measure(state, prob) <= cfg.converge_tol) {
      res.termination = Termination::Converged;
      break;
    }
    if (state.t >= t_end * (1.0 - 1e-15) || res.steps >= cfg.max_steps) {
      res.termination = Termination::TimeLimit;
      res.message = state.t >= t_end * (1.0 - 1e-15) ? "reached t_end" : "step limit";
      break;
    }
    FlowState trial = state;
    trial.dt_next = std::min(state.dt_next, t_end - state.t);
    if (next_checkpoint < INFINITY) {
      trial.dt_next = std::min(trial.dt_next, next_checkpoint - state.t);
    }
    if (!(trial.dt_next > 0.0)) trial.dt_next = state.dt_next;
    try {
      FlowState next = step(ws, trial, prob, cfg);
      // A step clipped to land on t_end or a checkpoint keeps the
      // controller's previous suggestion.
      if (trial.dt_next < state.dt_next) {
        next.dt_next = std::max(next.dt_next, state.dt_next);
      }
      state = std::move(next);
    } catch (const StiffnessFailure& e) {
      res.termination = Termination::StiffnessFailure;
      res.message = e.what();
      res.records.push_back(e.record());
      res.final_state = std::move(state);
      return res;
    } catch (const DegenerateMetric& e) {
      res.termination = Termination::DegenerateMetric;
      res.message = e.what();
      break;
    }
    ++res.steps;
    accept_extremes(state);
    last_recorded = false;
    if (cadence == 0.0 || state.t >= next_record - 1e-14) {
      record(state);
      last_recorded = true;
      while (cadence > 0.0 && next_record <= state.t + 1e-14) next_record += cadence;
    }
    if (state.t >= next_checkpoint - 1e-14) {
      if (opts.on_checkpoint) opts.on_checkpoint(state);
      while (next_checkpoint <= state.t + 1e-14) next_checkpoint += opts.checkpoint_every;
    }
  }
  if (!last_recorded) record(state);
  res.final_state = std::move(state);
  return res;
}

}  // namespace maflow
