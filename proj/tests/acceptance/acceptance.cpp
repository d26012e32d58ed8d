// Acceptance suite: one PASS/FAIL line per criterion. Flow runs are shared
// between criteria, so the whole thing takes a few minutes.
//
//   maflow_acceptance [--out DIR]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "maflow/checkpoint.hpp"
#include "maflow/class_tracker.hpp"
#include "maflow/config.hpp"
#include "maflow/elliptic.hpp"
#include "maflow/experiment.hpp"
#include "maflow/flow.hpp"
#include "maflow/monitor.hpp"
#include "support.hpp"

using namespace maflow;
using maflow::testing::minus_mean;
using maflow::testing::sup_diff;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void verdict(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("%s  criterion %2d  %-28s %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

struct Run {
  ExperimentConfig cfg;
  RunReport rep;
  FlowProblem prob;
};

Run run_preset(const std::string& name, const fs::path& out,
               const std::function<void(ExperimentConfig&)>& tweak = {}) {
  Run r;
  r.cfg = preset(name);
  r.cfg.out_dir = out.string();
  if (tweak) tweak(r.cfg);
  std::fprintf(stderr, "running %s ...\n", name.c_str());
  r.rep = run_experiment(r.cfg);
  r.prob = build_problem(r.cfg);
  if (r.prob.variant == Variant::CalabiYau) r.prob = gauge_fix(r.prob);
  std::fprintf(stderr, "  %s: %s at t=%.4g, %ld steps, %.1f s\n", name.c_str(),
               r.rep.termination ? to_string(*r.rep.termination).c_str() : "-",
               r.rep.final_t, r.rep.steps, r.rep.wall_seconds);
  return r;
}

bool converged(const Run& r) {
  return r.rep.termination && *r.rep.termination == Termination::Converged;
}

double final_measure(const Run& r) {
  SpectralWorkspace ws(r.prob.domain());
  auto s = make_state(ws, r.rep.final_t, *r.rep.final_u, r.prob, r.cfg.stepper.dealias);
  return convergence_measure(s, r.prob);
}

// Largest increase of a recorded quantity between consecutive records.
double worst_increase(const DiagnosticsSeries& s, double DiagnosticsRecord::*field) {
  double w = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < s.size(); ++i) w = std::max(w, s[i].*field - s[i - 1].*field);
  return w;
}

double closed_min_eig(const ClassVector& m) {
  const double a = m(0, 0).real(), d = m(1, 1).real();
  const double b = std::abs(m(0, 1));
  return 0.5 * (a + d) - std::sqrt(0.25 * (a - d) * (a - d) + b * b);
}

double bisection_T(const ClassVector& a0, const ClassVector& b) {
  double lo = 0.0, hi = 1.0;
  while (closed_min_eig(class_at(hi, a0, b)) > 0.0) {
    hi *= 2;
    if (hi > 1e12) return std::numeric_limits<double>::infinity();
  }
  for (int i = 0; i < 300 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (closed_min_eig(class_at(mid, a0, b)) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

int main(int argc, char** argv) {
  fs::path out = fs::temp_directory_path() / "maflow_acceptance";
  for (int i = 1; i + 1 < argc; ++i)
    if (std::strcmp(argv[i], "--out") == 0) out = argv[i + 1];
  fs::remove_all(out);
  fs::create_directories(out);

  Run cy1 = run_preset("cy_t2_n1", out);
  Run cy2 = run_preset("cy_t4_n2", out);
  Run ke = run_preset("ke_neg_t2", out);
  Run uq = run_preset("uniq_test", out);
  Run ref = run_preset("ref_flow_t2", out);
  Run loose = run_preset("cy_t2_n1", out, [](auto& c) { c.stepper.tolerance = 1e-6; });
  Run tight = run_preset("cy_t2_n1", out, [](auto& c) { c.stepper.tolerance = 1e-8; });

  // 1
  {
    SpectralWorkspace ws(cy1.prob.domain());
    const double meas = final_measure(cy1);
    auto oracle = solve_stationary_n1(ws, cy1.prob.f, cy1.prob.g0.entry(0, 0, 0).real());
    const double gap = sup_diff(minus_mean(*cy1.rep.final_u), oracle.u);
    const bool ok = converged(cy1) && meas <= 1e-8 && cy1.rep.final_t <= 50.0 &&
                    gap <= 1e-6 && cy1.rep.wall_seconds <= 30.0;
    verdict(1, "calabi_yau_n1", ok,
            fmt("t=%.4g sup|F-mean F|=%.3g oracle gap=%.3g wall=%.1fs", cy1.rep.final_t, meas,
                gap, cy1.rep.wall_seconds));
  }
  // 2
  {
    SpectralWorkspace ws(cy2.prob.domain());
    ScalarField F = -1.0 * cy2.prob.f;
    auto oracle = newton_ma(ws, cy2.prob.g0, F, cy2.cfg.newton);
    const double gap = sup_diff(minus_mean(*cy2.rep.final_u), oracle.u);
    const bool ok = converged(cy2) && gap <= 1e-5 && cy2.rep.wall_seconds <= 120.0;
    verdict(2, "calabi_yau_n2", ok,
            fmt("t=%.4g oracle gap=%.3g wall=%.1fs", cy2.rep.final_t, gap, cy2.rep.wall_seconds));
  }
  // 3
  {
    bool ok = true;
    double worst_excess = -INFINITY, worst_inc = -INFINITY;
    for (const Run* r : {&cy1, &cy2}) {
      const double sup_f = r->prob.f.sup_abs();
      for (const auto& rec : r->rep.records)
        worst_excess = std::max(worst_excess, rec.sup_abs_F - sup_f);
      worst_inc = std::max(worst_inc, worst_increase(r->rep.records, &DiagnosticsRecord::sup_abs_F));
    }
    ok = worst_excess <= 1e-8 && worst_inc <= 1e-9;
    verdict(3, "maximum_principle", ok,
            fmt("max(sup|F|-sup|f|)=%.3g max increase=%.3g", worst_excess, worst_inc));
  }
  // 4
  {
    auto rep = check_oscillation_contraction(cy1.rep.records);
    const double inc = worst_increase(cy1.rep.records, &DiagnosticsRecord::osc_F);
    const double delta = rep.constants.count("delta") ? rep.constants.at("delta") : NAN;
    const double res = rep.constants.count("fit_residual") ? rep.constants.at("fit_residual") : NAN;
    const bool ok = rep.passed() && delta < 1.0 && res < 0.1 && inc <= 0.0;
    verdict(4, "oscillation_contraction", ok,
            fmt("delta=%.4g fit residual=%.3g max osc increase=%.3g", delta, res, inc));
  }
  // 5
  {
    auto rep = check_energy_decay(cy1.rep.records);
    const double rate = rep.constants.count("rate") ? rep.constants.at("rate") : NAN;
    const bool ok = rep.passed() && rate > 0.0;
    verdict(5, "energy_decay", ok, fmt("rate=%.4g margin=%.3g", rate, rep.margin));
  }
  // 6
  {
    auto rep = check_negative_ke_decay(ke.rep.records, ke.prob.f.sup_abs());
    const double slope = rep.constants.count("slope") ? rep.constants.at("slope") : NAN;
    SpectralWorkspace ws(ke.prob.domain());
    auto oracle = newton_aubin(ws, ke.prob.g0, ke.prob.f, ke.cfg.newton);
    const double gap = sup_diff(*ke.rep.final_u, oracle.u);
    const bool ok = rep.passed() && slope <= -0.9 && gap <= 1e-6;
    verdict(6, "negative_ke_decay", ok,
            fmt("slope=%.4g bound margin=%.3g oracle gap=%.3g", slope, rep.margin, gap));
  }
  // 7
  {
    double drift = 0.0;
    for (const Run* r : {&cy1, &cy2, &loose, &tight}) {
      const double v0 = r->rep.records.front().volume_gtilde;
      for (const auto& rec : r->rep.records)
        drift = std::max(drift, std::abs(rec.volume_gtilde - v0) / v0);
    }
    verdict(7, "volume_conservation", drift <= 1e-6, fmt("max relative drift=%.3g", drift));
  }
  // 8
  {
    double eig = INFINITY, lap = INFINITY;
    for (const Run* r : {&cy1, &cy2, &ke, &uq, &ref, &loose, &tight}) {
      eig = std::min(eig, r->rep.min_eig_accepted);
      lap = std::min(lap, r->rep.min_n_plus_lap_accepted);
      for (const auto& rec : r->rep.records) {
        eig = std::min(eig, rec.min_eig_gtilde);
        lap = std::min(lap, rec.n_plus_lap_min);
      }
    }
    verdict(8, "positivity", eig > 0.0 && lap > 0.0,
            fmt("min eig g~=%.4g min n+lap u=%.4g (accepted steps, all presets)", eig, lap));
  }
  // 9
  {
    bool ok = true;
    double worst = 0.0;
    for (const Run* r : {&cy1, &cy2, &ke, &uq}) {
      auto rep = check_metric_equivalence(r->rep.records);
      const double C = rep.constants.at("C");
      worst = std::max(worst, C);
      ok = ok && converged(*r) && std::isfinite(C) && C <= 10.0;
    }
    verdict(9, "metric_equivalence", ok, fmt("largest C=%.4g over converged presets", worst));
  }
  // 10
  {
    const double gap = uq.rep.uniqueness_gap.value_or(INFINITY);
    verdict(10, "uniqueness", converged(uq) && gap <= 1e-6,
            fmt("sup|u(0 start) - u(perturbed start)|=%.3g", gap));
  }
  // 11
  {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    double worst = 0.0;
    int finite = 0, inf_ok = 0, inf_bad = 0;
    auto herm = [](double a, std::complex<double> b, double d) {
      return ClassVector::from_rows(2, {a, b, std::conj(b), d});
    };
    for (int k = 0; k < 100; ++k) {
      const std::complex<double> off(ud(rng), ud(rng));
      auto a0 = herm(1.0 + std::abs(ud(rng)) + std::abs(off), off,
                     1.0 + std::abs(ud(rng)) + std::abs(off));
      auto b = herm(ud(rng), {ud(rng), ud(rng)}, ud(rng));
      const double T = max_existence_time(a0, b), want = bisection_T(a0, b);
      if (std::isinf(want)) {
        (std::isinf(T) ? inf_ok : inf_bad)++;
        continue;
      }
      ++finite;
      worst = std::max(worst, std::abs(T - want) / std::max(1.0, want));
    }
    // negative semidefinite B
    for (int k = 0; k < 20; ++k) {
      const std::complex<double> off(ud(rng), ud(rng));
      const double a = std::abs(ud(rng)) + std::abs(off), d = std::abs(ud(rng)) + std::abs(off);
      auto b = herm(-a, -off, -d);
      (std::isinf(max_existence_time(ClassVector::identity(2), b)) ? inf_ok : inf_bad)++;
    }
    verdict(11, "class_tracker", worst <= 1e-10 && inf_bad == 0 && finite > 0,
            fmt("%g finite pairs, max rel error=%.3g, %g infinite ok, %g infinite wrong", finite,
                worst, inf_ok, inf_bad));
  }
  // 12
  {
    // spectral exactness
    const auto d = TorusDomain::make(2, {16, 16, 8, 16}, {1.0, 2.0, 1.0, 0.5});
    SpectralWorkspace ws(d);
    const int k[4] = {2, -3, 1, 5};
    auto theta = [&](std::span<const double> x) {
      double a = 0.3;
      for (int r = 0; r < 4; ++r) a += 2 * maflow::testing::kPi * k[r] * x[r] / d.periods[r];
      return a;
    };
    auto u = ScalarField::sample(d, [&](auto x) { return std::cos(theta(x)); });
    double spec = 0.0;
    for (int r = 0; r < 4; ++r) {
      const double w = 2 * maflow::testing::kPi * k[r] / d.periods[r];
      auto want = ScalarField::sample(d, [&](auto x) { return -w * std::sin(theta(x)); });
      spec = std::max(spec, sup_diff(partial(ws, u, r), want) / want.sup_abs());
    }
    // finite-difference Hessian
    const auto d64 = TorusDomain::uniform(2, 64);
    SpectralWorkspace ws64(d64);
    auto v = maflow::testing::random_trig(d64, 21, 1, 2e-3);
    auto h = complex_hessian(ws64, v);
    double fd = 0.0;
    for (std::size_t p = 0; p < h.points(); p += 4093)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          fd = std::max(fd, std::abs(h.entry(p, i, j) - maflow::testing::fd_hessian_at(v, p, i, j)));
    // quadratic Newton contraction on a manufactured solution
    const auto d16 = TorusDomain::uniform(2, 16);
    SpectralWorkspace ws16(d16);
    const std::complex<double> rows[] = {1.0, {0, 0.2}, {0, -0.2}, 1.0};
    auto g0 = make_flat_metric(d16, PointMatrix::from_rows(2, rows));
    auto psi = maflow::testing::random_trig(d16, 17, 2, 0.004);
    auto gt = perturb_metric(ws16, g0, psi);
    auto a = det_field(gt), b = det_field(g0);
    ScalarField F(d16);
    for (std::size_t p = 0; p < F.size(); ++p) F[p] = std::log(a[p] / b[p]);
    bool quad = true;
    int pairs = 0;
    for (const auto& hist : {newton_ma(ws16, g0, F).residual_history,
                             newton_aubin(ws16, g0, psi - F).residual_history}) {
      for (std::size_t i = 0; i + 1 < hist.size(); ++i) {
        if (hist[i] >= 1e-2) continue;
        ++pairs;
        quad = quad && hist[i + 1] <= std::max(5 * hist[i] * hist[i], 1e-13);
      }
    }
    // checkpoint round trip
    auto rnd = maflow::testing::random_trig(d, 5, 4, 1.0);
    write_checkpoint({0.1, rnd}, out / "roundtrip.bin");
    auto back = read_checkpoint(out / "roundtrip.bin");
    const bool exact = back.t == 0.1 &&
                       std::memcmp(back.u.values.data(), rnd.values.data(),
                                   rnd.size() * sizeof(double)) == 0;
    const bool ok = spec <= 1e-12 && fd <= 1e-6 && quad && pairs > 0 && exact;
    verdict(12, "numerical_kernels", ok,
            fmt("spectral rel err=%.3g fd hessian err=%.3g newton quadratic=%g checkpoint exact=%g",
                spec, fd, quad && pairs > 0, exact));
  }
  // 13
  {
    const double diff = sup_diff(minus_mean(*loose.rep.final_u), minus_mean(*tight.rep.final_u));
    verdict(13, "time_discretization", converged(loose) && converged(tight) && diff <= 1e-5,
            fmt("sup|u(tol 1e-6) - u(tol 1e-8)|=%.3g steps %g vs %g", diff,
                static_cast<double>(loose.rep.steps), static_cast<double>(tight.rep.steps)));
  }

  std::printf("%d of 13 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
