#include "maflow/monitor.hpp"

#include <cmath>
// boost 1.74 pchip calls isnan unqualified
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>

#include <algorithm>
#include <functional>
#include <limits>
#include <sstream>

namespace maflow {

std::array<double, 18> to_array(const DiagnosticsRecord& r) {
  return {r.t,           r.sup_abs_F,     r.sup_F,          r.inf_F,
          r.mean_F,      r.osc_F,         r.energy_E,       r.min_eig_gtilde,
          r.volume_gtilde, r.sup_S,       r.trace_lo,       r.trace_hi,
          r.n_plus_lap_min, r.sup_abs_u,  r.pinch_lo,       r.pinch_hi,
          r.density_lo,  r.density_hi};
}

DiagnosticsRecord from_array(const std::array<double, 18>& v) {
  DiagnosticsRecord r;
  r.t = v[0];
  r.sup_abs_F = v[1];
  r.sup_F = v[2];
  r.inf_F = v[3];
  r.mean_F = v[4];
  r.osc_F = v[5];
  r.energy_E = v[6];
  r.min_eig_gtilde = v[7];
  r.volume_gtilde = v[8];
  r.sup_S = v[9];
  r.trace_lo = v[10];
  r.trace_hi = v[11];
  r.n_plus_lap_min = v[12];
  r.sup_abs_u = v[13];
  r.pinch_lo = v[14];
  r.pinch_hi = v[15];
  r.density_lo = v[16];
  r.density_hi = v[17];
  return r;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Indeterminate: return "indeterminate";
  }
  return "unknown";
}

std::optional<DecayFit> fit_exponential(const std::vector<double>& t,
                                        const std::vector<double>& y,
                                        double floor, double t_lo, double t_hi) {
  std::vector<double> xs, ls;
  for (std::size_t i = 0; i < t.size() && i < y.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi || !(y[i] > floor)) continue;
    xs.push_back(t[i]);
    ls.push_back(std::log(y[i]));
  }
  if (xs.size() < 2) return std::nullopt;
  const double m = static_cast<double>(xs.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ls[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ls[i] - my);
  }
  if (!(sxx > 0.0)) return std::nullopt;
  const double slope = sxy / sxx;
  const double icpt = my - slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ls[i] - (icpt + slope * xs[i]);
    ss += r * r;
  }
  DecayFit fit;
  fit.t_a = xs.front();
  fit.t_b = xs.back();
  fit.rate = -slope;
  fit.amplitude = std::exp(icpt);
  fit.residual = std::sqrt(ss / m);
  fit.samples = static_cast<int>(xs.size());
  return fit;
}

DiagnosticsRecord snapshot(const SpectralWorkspace& ws, const FlowState& state,
                           const FlowProblem& prob, bool with_S) {
  DiagnosticsRecord r;
  r.t = state.t;
  const ScalarField& F = state.F;
  r.sup_abs_F = F.sup_abs();
  r.sup_F = F.max();
  r.inf_F = F.min();
  r.mean_F = F.mean();
  r.osc_F = r.sup_F - r.inf_F;

  const HermitianField& gt = state.g_tilde;
  const ScalarField dVt = det_field(gt);
  r.volume_gtilde = integrate(dVt);
  const ScalarField phi = mean_normalize(F, dVt);
  ScalarField phi2 = phi;
  for (double& v : phi2.values) v *= v;
  r.energy_E = 0.5 * integrate(phi2, dVt);
  r.min_eig_gtilde = min_eigenvalue_field(gt).min();
  r.sup_S = with_S ? third_order_S(ws, state.u, gt).max() : 0.0;

  const HermitianField bg = background_at(state.t, prob);
  const ScalarField fwd = trace_pair(gt, bg);
  const ScalarField bwd = trace_pair(bg, gt);
  r.n_plus_lap_min = fwd.min();
  r.trace_lo = std::min(fwd.min(), bwd.min());
  r.trace_hi = std::max(fwd.max(), bwd.max());
  r.sup_abs_u = mean_normalize(state.u, det_field(bg)).sup_abs();

  const auto [lo, hi] = relative_eigen_extrema(gt, prob.g0);
  r.pinch_lo = lo.min();
  r.pinch_hi = hi.max();

  const ScalarField omega = prob.variant == Variant::ReferenceFlow
                                ? prob.reference->omega_density
                                : det_field(prob.g0);
  double dlo = std::numeric_limits<double>::infinity();
  double dhi = -dlo;
  for (std::size_t p = 0; p < dVt.size(); ++p) {
    const double ratio = dVt[p] / omega[p];
    dlo = std::min(dlo, ratio);
    dhi = std::max(dhi, ratio);
  }
  r.density_lo = dlo;
  r.density_hi = dhi;
  return r;
}

namespace {

CheckReport make_report(std::string name) {
  CheckReport c;
  c.name = std::move(name);
  return c;
}

}  // namespace

CheckReport check_max_principle(const DiagnosticsSeries& s, double sup_f) {
  auto rep = make_report("max_principle");
  constexpr double kBoundSlack = 1e-8;
  constexpr double kMonotoneSlack = 1e-9;
  double margin = std::numeric_limits<double>::infinity();
  double peak = 0.0;
  std::ostringstream why;
  for (std::size_t i = 0; i < s.size(); ++i) {
    peak = std::max(peak, s[i].sup_abs_F);
    const double m = sup_f + kBoundSlack - s[i].sup_abs_F;
    margin = std::min(margin, m);
    if (m < 0.0 && why.tellp() == 0) {
      why << "sup|F| exceeds sup|f| at record " << i << " (t=" << s[i].t << ")";
    }
    if (i > 0) {
      const double inc = s[i].sup_abs_F - s[i - 1].sup_abs_F;
      const double mm = kMonotoneSlack - inc;
      margin = std::min(margin, mm);
      if (mm < 0.0 && why.tellp() == 0) {
        why << "sup|F| increased by " << inc << " at record " << i << " (t=" << s[i].t << ")";
      }
    }
  }
  if (s.empty()) margin = 0.0;
  rep.margin = margin;
  rep.verdict = margin >= 0.0 ? Verdict::Pass : Verdict::Fail;
  rep.constants["sup_f"] = sup_f;
  rep.constants["max_sup_abs_F"] = peak;
  rep.detail = why.str();
  return rep;
}

CheckReport check_oscillation_contraction(const DiagnosticsSeries& s, double unit) {
  auto rep = make_report("oscillation_contraction");
  constexpr double kFloor = 1e-12;
  std::vector<double> ts, logw, tw, w;
  for (const auto& r : s) {
    if (!(r.osc_F > kFloor)) break;
    if (!ts.empty() && !(r.t > ts.back())) continue;
    ts.push_back(r.t);
    logw.push_back(std::log(r.osc_F));
    tw.push_back(r.t);
    w.push_back(r.osc_F);
  }
  if (ts.size() < 2) {
    rep.verdict = Verdict::Pass;
    rep.detail = "oscillation below floor throughout (vacuous)";
    return rep;
  }
  const double t0 = ts.front();
  const double span = ts.back() - t0;
  if (unit <= 0.0) unit = span >= 3.0 ? 1.0 : span / 4.0;
  const int intervals = static_cast<int>(std::floor(span / unit + 1e-9));
  if (intervals < 3) {
    rep.verdict = Verdict::Indeterminate;
    rep.detail = "series too short (< 3 resampling intervals)";
    rep.constants["unit"] = unit;
    return rep;
  }

  const double t_last = ts.back();
  std::function<double(double)> interp;
  if (ts.size() >= 4) {
    interp = boost::math::interpolators::pchip<std::vector<double>>(
        std::vector<double>(ts), std::vector<double>(logw));
  } else {
    interp = [&ts, &logw](double x) {
      std::size_t i = 1;
      while (i + 1 < ts.size() && ts[i] < x) ++i;
      const double w = (x - ts[i - 1]) / (ts[i] - ts[i - 1]);
      return (1.0 - w) * logw[i - 1] + w * logw[i];
    };
  }
  double worst = 0.0;
  for (int m = 1; m < intervals; ++m) {
    const double a = t0 + m * unit;
    const double b = std::min(t_last, t0 + (m + 1) * unit);
    // log ratio per unit time
    if (b > a) worst = std::max(worst, std::exp((interp(b) - interp(a)) / (b - a)));
  }
  const auto fit = fit_exponential(tw, w, kFloor, -INFINITY, INFINITY);
  rep.constants["unit"] = unit;
  rep.constants["delta"] = worst;
  if (fit) {
    rep.constants["rate"] = fit->rate;
    rep.constants["amplitude"] = fit->amplitude;
    rep.constants["fit_residual"] = fit->residual;
    rep.constants["fitted_delta"] = std::exp(-fit->rate);
  }
  const double residual = fit ? fit->residual : 0.0;
  rep.margin = std::min(1.0 - worst, 0.1 - residual);
  rep.verdict = (worst < 1.0 && residual < 0.1) ? Verdict::Pass : Verdict::Fail;
  return rep;
}

CheckReport check_energy_decay(const DiagnosticsSeries& s) {
  auto rep = make_report("energy_decay");
  std::size_t start = s.size();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].osc_F < 0.5) {
      start = i;
      break;
    }
  }
  if (start == s.size()) {
    rep.verdict = Verdict::Indeterminate;
    rep.detail = "oscillation never dropped below 1/2";
    return rep;
  }
  constexpr double kSlack = 1e-10;
  double margin = kSlack;
  for (std::size_t i = start + 1; i < s.size(); ++i) {
    margin = std::min(margin, kSlack - (s[i].energy_E - s[i - 1].energy_E));
  }
  std::vector<double> t, e;
  for (std::size_t i = start; i < s.size(); ++i) {
    t.push_back(s[i].t);
    e.push_back(s[i].energy_E);
  }
  const auto fit = fit_exponential(t, e, 0.0, -INFINITY, INFINITY);
  rep.constants["t_star"] = s[start].t;
  bool rate_ok = true;
  if (fit) {
    rep.constants["rate"] = fit->rate;
    rep.constants["amplitude"] = fit->amplitude;
    rep.constants["fit_residual"] = fit->residual;
    rate_ok = fit->rate > 0.0;
  }
  rep.margin = margin;
  rep.verdict = (margin >= 0.0 && rate_ok) ? Verdict::Pass : Verdict::Fail;
  return rep;
}

CheckReport check_negative_ke_decay(const DiagnosticsSeries& s, double sup_f,
                                    double t_a, double t_b) {
  auto rep = make_report("negative_ke_decay");
  constexpr double kSlack = 1e-8;
  double margin = std::numeric_limits<double>::infinity();
  std::vector<double> t, y;
  for (const auto& r : s) {
    margin = std::min(margin, sup_f * std::exp(-r.t) + kSlack - r.sup_abs_F);
    t.push_back(r.t);
    y.push_back(r.sup_abs_F);
  }
  if (s.empty()) margin = 0.0;
  rep.constants["sup_f"] = sup_f;
  const bool any_signal = std::any_of(y.begin(), y.end(), [](double v) { return v > 1e-14; });
  const auto fit = fit_exponential(t, y, 1e-14, t_a, t_b);
  bool slope_ok = true;
  if (fit) {
    rep.constants["slope"] = -fit->rate;
    rep.constants["amplitude"] = fit->amplitude;
    rep.constants["fit_residual"] = fit->residual;
    slope_ok = -fit->rate <= -0.9;
    margin = std::min(margin, -0.9 + fit->rate);
  } else if (any_signal) {
    rep.verdict = Verdict::Indeterminate;
    rep.detail = "fewer than two samples above floor in the fit window";
    rep.margin = margin;
    return rep;
  }
  rep.margin = margin;
  rep.verdict = (margin >= 0.0 && slope_ok) ? Verdict::Pass : Verdict::Fail;
  return rep;
}

CheckReport check_metric_equivalence(const DiagnosticsSeries& s, double bound) {
  auto rep = make_report("metric_equivalence");
  double C = 1.0;
  for (const auto& r : s) {
    const double inv_lo = r.pinch_lo > 0.0 ? 1.0 / r.pinch_lo : INFINITY;
    const double inv_dlo = r.density_lo > 0.0 ? 1.0 / r.density_lo : INFINITY;
    C = std::max({C, r.pinch_hi, inv_lo, r.density_hi, inv_dlo});
  }
  rep.constants["C"] = C;
  rep.constants["bound"] = bound;
  rep.margin = std::isfinite(C) ? bound - C : -INFINITY;
  rep.verdict = C <= bound ? Verdict::Pass : Verdict::Fail;
  return rep;
}

CheckReport check_zero_order(const DiagnosticsSeries& s) {
  auto rep = make_report("zero_order");
  if (s.empty()) {
    rep.verdict = Verdict::Indeterminate;
    return rep;
  }
  const double t0 = s.front().t;
  const double quarter = t0 + 0.25 * (s.back().t - t0);
  double early = 0.0, peak = 0.0;
  for (const auto& r : s) {
    if (r.t <= quarter) early = std::max(early, r.sup_abs_u);
    peak = std::max(peak, r.sup_abs_u);
  }
  const double bound = 10.0 * early + 1e-12;
  rep.constants["first_quarter_max"] = early;
  rep.constants["max"] = peak;
  rep.margin = bound - peak;
  rep.verdict = peak <= bound ? Verdict::Pass : Verdict::Fail;
  return rep;
}

CheckReport check_calabi_S_bounded(const DiagnosticsSeries& s) {
  auto rep = make_report("calabi_S_bounded");
  if (s.empty()) {
    rep.verdict = Verdict::Indeterminate;
    return rep;
  }
  const double bound = 10.0 * (s.front().sup_S + 1.0);
  double peak = 0.0;
  for (const auto& r : s) peak = std::max(peak, r.sup_S);
  rep.constants["sup_S_max"] = peak;
  rep.constants["bound"] = bound;
  rep.margin = bound - peak;
  rep.verdict = peak <= bound ? Verdict::Pass : Verdict::Fail;
  return rep;
}

CheckReport check_volume_conservation(const DiagnosticsSeries& s, double tol) {
  auto rep = make_report("volume_conservation");
  if (s.empty()) {
    rep.verdict = Verdict::Indeterminate;
    return rep;
  }
  const double v0 = s.front().volume_gtilde;
  double drift = 0.0;
  for (const auto& r : s) drift = std::max(drift, std::abs(r.volume_gtilde - v0) / v0);
  rep.constants["relative_drift"] = drift;
  rep.margin = tol - drift;
  rep.verdict = drift <= tol ? Verdict::Pass : Verdict::Fail;
  return rep;
}

CheckReport check_positivity(const DiagnosticsSeries& s) {
  auto rep = make_report("positivity");
  double lo = INFINITY, lap = INFINITY;
  for (const auto& r : s) {
    lo = std::min(lo, r.min_eig_gtilde);
    lap = std::min(lap, r.n_plus_lap_min);
  }
  rep.constants["min_eig"] = lo;
  rep.constants["min_n_plus_lap"] = lap;
  rep.margin = std::min(lo, lap);
  rep.verdict = (lo > 0.0 && lap > 0.0) ? Verdict::Pass : Verdict::Fail;
  return rep;
}

}  // namespace maflow
