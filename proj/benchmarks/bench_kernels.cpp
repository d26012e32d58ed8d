#include <cmath>
#include <numbers>

#include <benchmark/benchmark.h>

#include "maflow/elliptic.hpp"
#include "maflow/flow.hpp"
#include "maflow/spectral.hpp"

using namespace maflow;

namespace {

ScalarField smooth(const TorusDomain& d, double amp) {
  return ScalarField::sample(d, [&](auto x) {
    double s = std::cos(2 * std::numbers::pi * x[0]);
    if (x.size() > 2) s += 0.5 * std::sin(2 * std::numbers::pi * (x[1] + x[2]));
    return amp * s;
  });
}

TorusDomain domain_for(const benchmark::State& st) {
  return TorusDomain::uniform(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
}

}  // namespace

static void BM_ComplexHessian(benchmark::State& st) {
  const auto d = domain_for(st);
  SpectralWorkspace ws(d);
  auto u = smooth(d, 0.01);
  for (auto _ : st) benchmark::DoNotOptimize(complex_hessian(ws, u));
  st.SetItemsProcessed(st.iterations() * static_cast<long>(d.points()));
}
BENCHMARK(BM_ComplexHessian)->Args({1, 64})->Args({1, 256})->Args({2, 16})->Args({2, 32})
    ->Unit(benchmark::kMicrosecond);

static void BM_RhsCalabiYau(benchmark::State& st) {
  const auto d = domain_for(st);
  SpectralWorkspace ws(d);
  auto prob = FlowProblem::calabi_yau(make_flat_metric(d, PointMatrix::identity(d.n)),
                                      smooth(d, 0.1));
  auto u = smooth(d, 0.005);
  for (auto _ : st) benchmark::DoNotOptimize(rhs_calabi_yau(ws, u, prob));
  st.SetItemsProcessed(st.iterations() * static_cast<long>(d.points()));
}
BENCHMARK(BM_RhsCalabiYau)->Args({1, 64})->Args({2, 16})->Args({2, 32})
    ->Unit(benchmark::kMicrosecond);

static void BM_Step(benchmark::State& st) {
  const auto d = domain_for(st);
  SpectralWorkspace ws(d);
  auto prob = FlowProblem::calabi_yau(make_flat_metric(d, PointMatrix::identity(d.n)),
                                      smooth(d, 0.1));
  auto s0 = make_state(ws, 0.0, ScalarField(d), prob, true);
  for (auto _ : st) benchmark::DoNotOptimize(step_fixed(ws, s0, prob, 1e-4, true));
}
BENCHMARK(BM_Step)->Args({1, 64})->Args({2, 16})->Unit(benchmark::kMicrosecond);

static void BM_NewtonMA(benchmark::State& st) {
  const auto d = domain_for(st);
  SpectralWorkspace ws(d);
  auto g0 = make_flat_metric(d, PointMatrix::identity(d.n));
  auto F = smooth(d, -0.1);
  for (auto _ : st) benchmark::DoNotOptimize(newton_ma(ws, g0, F));
}
BENCHMARK(BM_NewtonMA)->Args({1, 64})->Args({2, 16})->Unit(benchmark::kMillisecond);

static void BM_NewtonAubin(benchmark::State& st) {
  const auto d = domain_for(st);
  SpectralWorkspace ws(d);
  auto g0 = make_flat_metric(d, PointMatrix::identity(d.n));
  auto f = smooth(d, 0.1);
  for (auto _ : st) benchmark::DoNotOptimize(newton_aubin(ws, g0, f));
}
BENCHMARK(BM_NewtonAubin)->Args({1, 64})->Args({2, 16})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
