#include <cmath>

#include "doctest.h"
#include "maflow/elliptic.hpp"
#include "maflow/errors.hpp"
#include "maflow/flow.hpp"
#include "support.hpp"

using namespace maflow;
using maflow::testing::kPi;
using maflow::testing::minus_mean;
using maflow::testing::sup_diff;

namespace {

ScalarField cos_x(const TorusDomain& d, double a, double L = 1.0) {
  return ScalarField::sample(d, [&](auto x) { return a * std::cos(2 * kPi * x[0] / L); });
}

HermitianField ident(const TorusDomain& d) {
  return make_flat_metric(d, PointMatrix::identity(d.n));
}

}  // namespace

TEST_SUITE("flow_integrator") {

TEST_CASE("rhs_calabi_yau") {
  const auto d = TorusDomain::uniform(1, 32);
  SpectralWorkspace ws(d);
  auto zero = FlowProblem::calabi_yau(ident(d), ScalarField(d));
  CHECK(rhs_calabi_yau(ws, ScalarField(d), zero).sup_abs() == 0.0);

  auto f = cos_x(d, 0.2);
  auto prob = FlowProblem::calabi_yau(ident(d), f);
  CHECK(sup_diff(rhs_calabi_yau(ws, ScalarField(d), prob), f) < 1e-15);

  // u = eps cos(2 pi x) has u_{z zbar} = h = -pi^2 eps cos(2 pi x)
  const double eps = 0.04;
  auto u = cos_x(d, eps);
  auto F = rhs_calabi_yau(ws, u, prob, false);
  double worst = 0;
  for (std::size_t p = 0; p < F.size(); ++p) {
    const double h = -kPi * kPi * eps * std::cos(2 * kPi * d.coordinate(p, 0));
    worst = std::max(worst, std::abs(F[p] - (std::log1p(h) + f[p])));
  }
  CHECK(worst < 1e-13);
}

TEST_CASE("rhs_calabi_yau reports positivity loss") {
  const auto d = TorusDomain::uniform(1, 32);
  SpectralWorkspace ws(d);
  auto prob = FlowProblem::calabi_yau(ident(d), ScalarField(d));
  CHECK_THROWS_AS(rhs_calabi_yau(ws, cos_x(d, 0.2), prob), DegenerateMetric);
}

TEST_CASE("rhs_negative_ke") {
  const auto d = TorusDomain::uniform(1, 16);
  SpectralWorkspace ws(d);
  auto prob = FlowProblem::negative_ke(ident(d), ScalarField(d));
  CHECK(rhs_negative_ke(ws, ScalarField(d), prob).sup_abs() == 0.0);
  auto F = rhs_negative_ke(ws, ScalarField(d, 0.7), prob);
  for (double v : F.values) CHECK(v == doctest::Approx(-0.7).epsilon(1e-14));

  auto f = cos_x(d, 0.2);
  auto pf = FlowProblem::negative_ke(ident(d), f);
  auto sol = newton_aubin(ws, pf.g0, f);
  CHECK(rhs_negative_ke(ws, sol.u, pf, false).sup_abs() <= 1e-9);
}

TEST_CASE("reference_form and rhs_reference") {
  const auto d = TorusDomain::uniform(2, 8);
  SpectralWorkspace ws(d);
  const double a[] = {1.0, 1.0}, b[] = {3.0, 1.0};
  auto w0 = make_flat_metric(d, PointMatrix::diagonal(a));
  auto eta = make_flat_metric(d, PointMatrix::diagonal(b));
  auto prob = FlowProblem::reference_flow(w0, eta, 2.0, ScalarField(d, 1.0));
  CHECK(reference_form(0.0, prob).data == w0.data);
  auto end = reference_form(2.0, prob);
  for (std::size_t i = 0; i < end.data.size(); ++i)
    CHECK(std::abs(end.data[i] - eta.data[i]) < 1e-15);
  auto mid = reference_form(1.0, prob);
  CHECK(std::abs(mid.entry(3, 0, 0) - 2.0) < 1e-15);
  CHECK(std::abs(mid.entry(3, 1, 1) - 1.0) < 1e-15);
  CHECK_THROWS_AS(reference_form(2.5, prob), std::domain_error);

  // phi = 0, Omega = det(w_t)
  auto self = FlowProblem::reference_flow(w0, eta, 2.0, det_field(mid));
  CHECK(rhs_reference(ws, ScalarField(d), 1.0, self).sup_abs() < 1e-14);

  // w0 = I, eta = 2I, t = T'/2, Omega = 1: log det(1.5 I) = log 2.25
  auto two = 2.0 * ident(d);
  two.metric = true;
  auto p2 = FlowProblem::reference_flow(ident(d), two, 1.0, ScalarField(d, 1.0));
  for (double v : rhs_reference(ws, ScalarField(d), 0.5, p2).values)
    CHECK(v == doctest::Approx(std::log(2.25)).epsilon(1e-14));
}

TEST_CASE("static reference flow reduces to Calabi-Yau") {
  const auto d = TorusDomain::uniform(1, 16);
  SpectralWorkspace ws(d);
  const cplx c[] = {1.3};
  auto g0 = make_flat_metric(d, PointMatrix::from_rows(1, c));
  auto f = cos_x(d, 0.1);
  ScalarField omega(d);
  for (std::size_t p = 0; p < omega.size(); ++p) omega[p] = 1.3 * std::exp(-f[p]);
  auto ref = FlowProblem::reference_flow(g0, g0, 1.0, omega);
  auto cy = FlowProblem::calabi_yau(g0, f);
  auto u = cos_x(d, 0.01) + ScalarField::sample(d, [](auto x) { return 0.005 * std::sin(2 * kPi * x[1]); });
  CHECK(sup_diff(rhs_reference(ws, u, 0.3, ref, false), rhs_calabi_yau(ws, u, cy, false)) < 1e-13);
}

TEST_CASE("gauge_fix") {
  const auto d = TorusDomain::uniform(1, 32);
  auto p0 = gauge_fix(FlowProblem::calabi_yau(ident(d), ScalarField(d)));
  CHECK(p0.f.sup_abs() == 0.0);
  auto pc = gauge_fix(FlowProblem::calabi_yau(ident(d), ScalarField(d, 0.3)));
  CHECK(pc.f.sup_abs() < 1e-14);

  auto p = gauge_fix(FlowProblem::calabi_yau(ident(d), cos_x(d, 0.2)));
  ScalarField ef(d);
  for (std::size_t q = 0; q < ef.size(); ++q) ef[q] = std::exp(p.f[q]);
  CHECK(std::abs(integrate(ef) - d.volume()) < 1e-12);
  double m = 0;
  for (std::size_t q = 0; q < ef.size(); ++q) m += std::exp(0.2 * std::cos(2 * kPi * d.coordinate(q, 0)));
  m /= ef.size();
  CHECK(p.gauge_shift == doctest::Approx(std::log(m)).epsilon(1e-14));
}

TEST_CASE("u = 0, f = 0 is an exact fixed point") {
  const auto d = TorusDomain::uniform(2, 8);
  SpectralWorkspace ws(d);
  auto prob = FlowProblem::calabi_yau(ident(d), ScalarField(d));
  StepperConfig cfg;
  auto s = make_state(ws, 0.0, ScalarField(d), prob, true);
  for (int i = 0; i < 20; ++i) {
    s = step(ws, s, prob, cfg);
    CHECK(s.u.sup_abs() <= 1e-13);
  }
  auto r = run(ws, prob, cfg);
  CHECK(r.termination == Termination::Converged);
  CHECK(r.steps == 0);
  CHECK(r.final_state.u.sup_abs() == 0.0);
}

TEST_CASE("one step against the linearized heat solution") {
  // With f = eps cos(2 pi x) the cosine coefficient obeys a' = -pi^2 a + eps
  // up to O(eps^2).
  const auto d = TorusDomain::uniform(1, 32);
  SpectralWorkspace ws(d);
  const double eps = 1e-6, dt = 0.01;
  auto prob = FlowProblem::calabi_yau(ident(d), cos_x(d, eps));
  auto s = step_fixed(ws, make_state(ws, 0.0, ScalarField(d), prob, true), prob, dt, true);
  const double lam = kPi * kPi;
  const double a = eps * (1 - std::exp(-lam * dt)) / lam;
  CHECK(sup_diff(s.u, cos_x(d, a)) < 1e-14);
}

TEST_CASE("RK4 global error shrinks about 16x per halving") {
  const auto d = TorusDomain::make(1, {16, 16}, {4.0, 4.0});
  SpectralWorkspace ws(d);
  auto prob = FlowProblem::calabi_yau(ident(d), cos_x(d, 0.2, 4.0));
  auto solve = [&](double dt) {
    auto s = make_state(ws, 0.0, ScalarField(d), prob, true);
    const int steps = static_cast<int>(std::lround(0.8 / dt));
    for (int i = 0; i < steps; ++i) s = step_fixed(ws, s, prob, dt, true);
    return s.u;
  };
  auto ref = solve(0.0025);
  const double e1 = sup_diff(solve(0.04), ref);
  const double e2 = sup_diff(solve(0.02), ref);
  const double e3 = sup_diff(solve(0.01), ref);
  INFO("errors " << e1 << " " << e2 << " " << e3);
  CHECK(e1 / e2 > 13.0);
  CHECK(e1 / e2 < 19.0);
  CHECK(e2 / e3 > 13.0);
  CHECK(e2 / e3 < 19.0);
}

TEST_CASE("dt underflow raises StiffnessFailure") {
  const auto d = TorusDomain::uniform(1, 16);
  SpectralWorkspace ws(d);
  auto prob = FlowProblem::calabi_yau(ident(d), cos_x(d, 0.2));
  StepperConfig cfg;
  cfg.tolerance = 1e-300;
  auto s = make_state(ws, 0.0, ScalarField(d), prob, true);
  CHECK_THROWS_AS(step(ws, s, prob, cfg), StiffnessFailure);
  auto r = run(ws, prob, cfg);
  CHECK(r.termination == Termination::StiffnessFailure);
}

TEST_CASE("n=1 Calabi-Yau run converges to the Poisson oracle") {
  const auto d = TorusDomain::uniform(1, 16);
  SpectralWorkspace ws(d);
  auto prob = gauge_fix(FlowProblem::calabi_yau(ident(d), cos_x(d, 0.2)));
  StepperConfig cfg;
  cfg.tolerance = 1e-10;
  RunOptions ro;
  ro.record_S = false;
  auto r = run(ws, prob, cfg, ro);
  REQUIRE(r.termination == Termination::Converged);
  CHECK(convergence_measure(r.final_state, prob) <= 1e-8);
  auto oracle = solve_stationary_n1(ws, prob.f, 1.0);
  CHECK(sup_diff(minus_mean(r.final_state.u), oracle.u) <= 1e-6);
  CHECK(r.min_eig_accepted > 0.0);
}

TEST_CASE("NegativeKE run converges to the Aubin oracle") {
  const auto d = TorusDomain::uniform(1, 16);
  SpectralWorkspace ws(d);
  auto f = cos_x(d, 0.2) + ScalarField(d, 0.05);
  auto prob = FlowProblem::negative_ke(ident(d), f);
  StepperConfig cfg;
  cfg.tolerance = 1e-10;
  cfg.converge_tol = 1e-9;
  RunOptions ro;
  ro.record_S = false;
  auto r = run(ws, prob, cfg, ro);
  REQUIRE(r.termination == Termination::Converged);
  auto oracle = newton_aubin(ws, prob.g0, f);
  CHECK(sup_diff(r.final_state.u, oracle.u) <= 1e-6);
}

}  // TEST_SUITE
