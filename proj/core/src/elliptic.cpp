#include "maflow/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "maflow/errors.hpp"

namespace maflow {

void NewtonConfig::validate() const {
  if (!(tolerance > 0.0)) throw std::invalid_argument("Newton tolerance must be positive");
  if (max_iterations < 1) throw std::invalid_argument("need at least one Newton iteration");
  if (!(min_damping > 0.0 && min_damping <= 1.0)) {
    throw std::invalid_argument("min_damping must lie in (0, 1]");
  }
}

namespace {

// Angular wavenumber per mode and real direction; `zero_nyquist` drops the
// unpaired mode as first-derivative tables must.
std::vector<std::vector<double>> wavenumber_table(const TorusDomain& d,
                                                  bool zero_nyquist) {
  const std::size_t N = d.points();
  std::vector<std::vector<double>> k(d.real_dims(), std::vector<double>(N));
  for (std::size_t p = 0; p < N; ++p) {
    std::size_t rest = p;
    for (int dir = d.real_dims() - 1; dir >= 0; --dir) {
      const int count = d.counts[dir];
      const int j = static_cast<int>(rest % count);
      rest /= count;
      const int kint = j <= count / 2 ? j : j - count;
      const bool nyq = 2 * j == count;
      k[dir][p] = (nyq && zero_nyquist) ? 0.0
                                        : 2.0 * std::numbers::pi * kint / d.periods[dir];
    }
  }
  return k;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Local 2x2 (or 1x1) Hermitian algebra, row-major.
struct Mat {
  int n;
  cplx e[4];
};

double mat_det(const Mat& m) {
  return m.n == 1 ? m.e[0].real() : (m.e[0] * m.e[3] - m.e[1] * m.e[2]).real();
}

Mat mat_adj(const Mat& m) {
  if (m.n == 1) return {1, {cplx(1.0), {}, {}, {}}};
  return {2, {m.e[3], -m.e[1], -m.e[2], m.e[0]}};
}

double mat_min_eig(const Mat& m) {
  if (m.n == 1) return m.e[0].real();
  const double a = m.e[0].real(), d = m.e[3].real();
  return 0.5 * (a + d) - std::sqrt(0.25 * (a - d) * (a - d) + std::norm(m.e[1]));
}

class OracleOperators {
 public:
  explicit OracleOperators(const SpectralWorkspace& ws)
      : ws_(ws), n_(ws.domain().n), N_(ws.points()) {
    const auto k = wavenumber_table(ws.domain(), true);
    hol_.assign(n_, std::vector<cplx>(N_));
    anti_.assign(n_, std::vector<cplx>(N_));
    for (int i = 0; i < n_; ++i)
      for (std::size_t p = 0; p < N_; ++p) {
        const double kx = k[2 * i][p], ky = k[2 * i + 1][p];
        hol_[i][p] = cplx(0.5 * ky, 0.5 * kx);
        anti_[i][p] = cplx(-0.5 * ky, 0.5 * kx);
      }
  }

  int n() const { return n_; }
  std::size_t size() const { return N_; }

  // Removes the modes every first-derivative symbol annihilates (the mean
  // and the Nyquist combinations): the kernel of the shift-free operator.
  std::vector<double> project_range(const std::vector<double>& v) const {
    auto vhat = ws_.forward(v);
    for (std::size_t p = 0; p < N_; ++p) {
      bool null = true;
      for (int i = 0; i < n_ && null; ++i) null = hol_[i][p] == cplx(0.0);
      if (null) vhat[p] = 0.0;
    }
    return ws_.inverse_real(std::move(vhat));
  }

  // All n*n entries of d_i d_jbar u, point-major.
  std::vector<cplx> hessian(const std::vector<double>& u) const {
    const auto uhat = ws_.forward(u);
    std::vector<cplx> out(N_ * n_ * n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        std::vector<cplx> v(N_);
        for (std::size_t p = 0; p < N_; ++p) v[p] = hol_[i][p] * anti_[j][p] * uhat[p];
        ws_.inverse(v);
        for (std::size_t p = 0; p < N_; ++p) out[p * n_ * n_ + i * n_ + j] = v[p];
      }
    return out;
  }

  // -sum_ij d_i ( adj_{ji} d_jbar v ) + shift * v
  std::vector<double> apply(const std::vector<double>& v, const std::vector<cplx>& adj,
                            const std::vector<double>* shift) const {
    const auto vhat = ws_.forward(v);
    std::vector<std::vector<cplx>> dbar(n_, std::vector<cplx>(N_));
    for (int j = 0; j < n_; ++j) {
      for (std::size_t p = 0; p < N_; ++p) dbar[j][p] = anti_[j][p] * vhat[p];
      ws_.inverse(dbar[j]);
    }
    std::vector<cplx> acc(N_, cplx(0.0));
    for (int i = 0; i < n_; ++i) {
      std::vector<cplx> q(N_);
      for (std::size_t p = 0; p < N_; ++p) {
        cplx s = 0.0;
        for (int j = 0; j < n_; ++j) s += adj[p * n_ * n_ + j * n_ + i] * dbar[j][p];
        q[p] = s;
      }
      const auto qhat = ws_.forward(q);
      for (std::size_t p = 0; p < N_; ++p) acc[p] += hol_[i][p] * qhat[p];
    }
    ws_.inverse(acc);
    std::vector<double> out(N_);
    for (std::size_t p = 0; p < N_; ++p) {
      out[p] = -acc[p].real() + (shift ? (*shift)[p] * v[p] : 0.0);
    }
    return out;
  }

  // Inverse of the constant-coefficient operator built from the grid means
  // of adj and shift. The zero mode maps to zero when the shift vanishes.
  std::vector<double> precondition(const std::vector<double>& r,
                                   const std::vector<cplx>& mean_adj,
                                   double mean_shift) const {
    auto rhat = ws_.forward(r);
    for (std::size_t p = 0; p < N_; ++p) {
      cplx sym = mean_shift;
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j)
          sym -= mean_adj[j * n_ + i] * hol_[i][p] * anti_[j][p];
      const double s = sym.real();
      rhat[p] = s > 1e-14 ? rhat[p] / s : cplx(0.0);
    }
    return ws_.inverse_real(std::move(rhat));
  }

 private:
  const SpectralWorkspace& ws_;
  int n_;
  std::size_t N_;
  std::vector<std::vector<cplx>> hol_;
  std::vector<std::vector<cplx>> anti_;
};

struct MetricData {
  std::vector<cplx> adj;     // point-major n*n
  std::vector<double> det;   // det g~
  std::vector<double> logratio;  // log det g~ - log det g0
  double min_eig = 0.0;
};

MetricData evaluate_metric(const OracleOperators& ops, const HermitianField& g0,
                           const std::vector<double>& u) {
  const int n = ops.n();
  const std::size_t N = ops.size();
  const auto H = ops.hessian(u);
  MetricData m;
  m.adj.resize(N * n * n);
  m.det.resize(N);
  m.logratio.resize(N);
  m.min_eig = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < N; ++p) {
    Mat g{n, {}}, b{n, {}};
    for (int k = 0; k < n * n; ++k) {
      b.e[k] = g0.data[p * n * n + k];
      g.e[k] = b.e[k] + H[p * n * n + k];
    }
    // Hermitian part only.
    if (n == 2) {
      const cplx off = 0.5 * (g.e[1] + std::conj(g.e[2]));
      g.e[1] = off;
      g.e[2] = std::conj(off);
    }
    g.e[0] = g.e[0].real();
    g.e[n * n - 1] = g.e[n * n - 1].real();
    const double d = mat_det(g);
    m.det[p] = d;
    m.min_eig = std::min(m.min_eig, mat_min_eig(g));
    m.logratio[p] = d > 0.0 ? std::log(d) - std::log(mat_det(b))
                            : std::numeric_limits<double>::quiet_NaN();
    const Mat a = mat_adj(g);
    for (int k = 0; k < n * n; ++k) m.adj[p * n * n + k] = a.e[k];
  }
  return m;
}

struct Residual {
  std::vector<double> r;  // pointwise residual (R - c for Monge-Ampere)
  double c = 0.0;
  double sup = 0.0;
};

// Monge-Ampere: the part of R that ddbar u can reach, i.e. R without its
// grid mean (returned as c) and without the modes every derivative symbol
// annihilates. Pointwise R - c keeps an aliasing floor no u can remove.
Residual residual_of(const OracleOperators& ops, StationaryEquation eq,
                     const MetricData& m, const std::vector<double>& u,
                     const ScalarField& data) {
  const std::size_t N = u.size();
  Residual res;
  res.r.resize(N);
  bool finite = true;
  if (eq == StationaryEquation::MongeAmpere) {
    for (std::size_t p = 0; p < N; ++p) {
      res.r[p] = m.logratio[p] - data[p];
      finite = finite && std::isfinite(res.r[p]);
    }
    if (finite) {
      res.c = std::accumulate(res.r.begin(), res.r.end(), 0.0) / static_cast<double>(N);
      res.r = ops.project_range(res.r);
    }
  } else {
    for (std::size_t p = 0; p < N; ++p) res.r[p] = m.logratio[p] - u[p] + data[p];
  }
  for (double v : res.r) res.sup = std::max(res.sup, std::isfinite(v) ? std::abs(v) : INFINITY);
  if (!finite) res.sup = INFINITY;
  return res;
}

// Preconditioned CG on the operator of `apply`; b must lie in its range.
std::vector<double> pcg(const OracleOperators& ops, const MetricData& m,
                        const std::vector<double>* shift, const std::vector<double>& b,
                        bool project_mean, const NewtonConfig& cfg) {
  const int n = ops.n();
  const std::size_t N = ops.size();
  std::vector<cplx> mean_adj(n * n, cplx(0.0));
  for (std::size_t p = 0; p < N; ++p)
    for (int k = 0; k < n * n; ++k) mean_adj[k] += m.adj[p * n * n + k];
  for (auto& v : mean_adj) v /= static_cast<double>(N);
  const double mean_shift =
      shift ? std::accumulate(shift->begin(), shift->end(), 0.0) / N : 0.0;

  std::vector<double> x(N, 0.0);
  // Without a shift the operator is singular; keep b in its range. The
  // operator and the preconditioner both map into that range afterwards.
  std::vector<double> r = project_mean ? ops.project_range(b) : b;
  const double bnorm = std::sqrt(dot(r, r));
  if (bnorm == 0.0) return x;
  std::vector<double> z = ops.precondition(r, mean_adj, mean_shift);
  std::vector<double> d = z;
  double rz = dot(r, z);
  for (int it = 0; it < cfg.cg_max_iterations; ++it) {
    std::vector<double> Ad = ops.apply(d, m.adj, shift);
    const double dAd = dot(d, Ad);
    if (!(dAd > 0.0) || !(rz > 0.0)) break;
    const double alpha = rz / dAd;
    for (std::size_t p = 0; p < N; ++p) {
      x[p] += alpha * d[p];
      r[p] -= alpha * Ad[p];
    }
    if (std::sqrt(dot(r, r)) <= cfg.cg_tolerance * bnorm) break;
    z = ops.precondition(r, mean_adj, mean_shift);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t p = 0; p < N; ++p) d[p] = z[p] + beta * d[p];
  }
  if (project_mean) {
    const double avg = std::accumulate(x.begin(), x.end(), 0.0) / N;
    for (auto& v : x) v -= avg;
  }
  return x;
}

// r + J delta, J the exact linearization of the residual at m.
std::vector<double> linear_residual(const OracleOperators& ops, StationaryEquation eq,
                                    const MetricData& m, const std::vector<double>& delta,
                                    const std::vector<double>& r) {
  const int n = ops.n();
  const std::size_t N = ops.size();
  const auto H = ops.hessian(delta);
  std::vector<double> out(N);
  for (std::size_t p = 0; p < N; ++p) {
    cplx tr = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) tr += m.adj[p * n * n + j * n + i] * H[p * n * n + i * n + j];
    out[p] = tr.real() / m.det[p];
    if (eq == StationaryEquation::Aubin) out[p] -= delta[p];
  }
  if (eq == StationaryEquation::MongeAmpere) out = ops.project_range(out);
  for (std::size_t p = 0; p < N; ++p) out[p] += r[p];
  return out;
}

NewtonResult damped_newton(const SpectralWorkspace& ws, const HermitianField& g0,
                           const ScalarField& data, StationaryEquation eq,
                           const NewtonConfig& cfg) {
  cfg.validate();
  if (!(ws.domain() == g0.domain) || !(data.domain == g0.domain)) {
    throw DomainMismatch("Newton solve: inconsistent domains");
  }
  const OracleOperators ops(ws);
  const std::size_t N = ops.size();
  const bool ma = eq == StationaryEquation::MongeAmpere;

  std::vector<double> u(N, 0.0);
  MetricData m = evaluate_metric(ops, g0, u);
  Residual res = residual_of(ops, eq, m, u, data);
  NewtonResult out;
  out.residual_history.push_back(res.sup);

  for (int it = 0; res.sup > cfg.tolerance; ++it) {
    if (it >= cfg.max_iterations) {
      std::ostringstream msg;
      msg << "Newton did not converge in " << cfg.max_iterations
          << " iterations (residual " << res.sup << ")";
      throw NonConvergence(msg.str(), out.residual_history);
    }
    // Newton step J delta = -r. The symmetric divergence form is only an
    // approximate inverse of J on the grid (aliasing in the product rule,
    // the projected modes), so correct its defect until the linear residual
    // is far below r^2.
    std::vector<double> shift;
    if (!ma) shift = m.det;
    std::vector<double> delta(N, 0.0);
    const double target = std::max(std::min(1e-3 * res.sup, 0.1 * res.sup * res.sup), 1e-15);
    std::vector<double> e = res.r;
    for (int pass = 0; pass < 20; ++pass) {
      std::vector<double> rhs(N);
      for (std::size_t p = 0; p < N; ++p) rhs[p] = m.det[p] * e[p];
      const auto corr = pcg(ops, m, ma ? nullptr : &shift, rhs, ma, cfg);
      for (std::size_t p = 0; p < N; ++p) delta[p] += corr[p];
      e = linear_residual(ops, eq, m, delta, res.r);
      double sup = 0.0;
      for (double v : e) sup = std::max(sup, std::abs(v));
      if (sup <= target) break;
    }

    const double margin = m.min_eig;
    double lambda = 1.0;
    bool positivity_failed = false;
    while (true) {
      std::vector<double> trial = u;
      for (std::size_t p = 0; p < N; ++p) trial[p] += lambda * delta[p];
      MetricData mt = evaluate_metric(ops, g0, trial);
      const bool positive = mt.min_eig >= 0.5 * margin;
      Residual rt;
      if (positive) rt = residual_of(ops, eq, mt, trial, data);
      if (positive && rt.sup < res.sup) {
        u = std::move(trial);
        m = std::move(mt);
        res = std::move(rt);
        break;
      }
      positivity_failed = !positive;
      lambda *= 0.5;
      if (lambda < cfg.min_damping) {
        if (positivity_failed) {
          throw DegenerateMetric("Newton damping could not keep g0 + ddbar u positive",
                                 0, mt.min_eig);
        }
        std::ostringstream msg;
        msg << "Newton line search stalled at residual " << res.sup;
        throw NonConvergence(msg.str(), out.residual_history);
      }
    }
    out.residual_history.push_back(res.sup);
    out.iterations = it + 1;
  }
  out.u = ScalarField(g0.domain, std::move(u));
  out.c = res.c;
  return out;
}

}  // namespace

NewtonResult newton_ma(const SpectralWorkspace& ws, const HermitianField& g0,
                       const ScalarField& F, const NewtonConfig& cfg) {
  return damped_newton(ws, g0, F, StationaryEquation::MongeAmpere, cfg);
}

NewtonResult newton_aubin(const SpectralWorkspace& ws, const HermitianField& g0,
                          const ScalarField& f, const NewtonConfig& cfg) {
  return damped_newton(ws, g0, f, StationaryEquation::Aubin, cfg);
}

double residual_sup(const SpectralWorkspace& ws, const ScalarField& u,
                    StationaryEquation eq, const HermitianField& g0,
                    const ScalarField& data) {
  if (!(u.domain == g0.domain) || !(data.domain == g0.domain)) {
    throw DomainMismatch("residual_sup: inconsistent domains");
  }
  const OracleOperators ops(ws);
  const MetricData m = evaluate_metric(ops, g0, u.values);
  if (!(m.min_eig > 0.0)) {
    throw DegenerateMetric("residual_sup: g0 + ddbar u is not positive", 0, m.min_eig);
  }
  return residual_of(ops, eq, m, u.values, data).sup;
}

StationaryN1 solve_stationary_n1(const SpectralWorkspace& ws, const ScalarField& f,
                                 double g0) {
  const TorusDomain& d = f.domain;
  if (d.n != 1) throw std::invalid_argument("solve_stationary_n1 needs n = 1");
  if (!(g0 > 0.0)) throw std::invalid_argument("g0 must be positive");
  if (!(ws.domain() == d)) throw DomainMismatch("workspace/field domain mismatch");
  const std::size_t N = d.points();

  // e^c = Vol / int e^{-f} dV
  double mass = 0.0;
  for (double v : f.values) mass += std::exp(-v);
  const double c = -std::log(mass / static_cast<double>(N));

  std::vector<double> rhs(N);
  for (std::size_t p = 0; p < N; ++p) rhs[p] = g0 * (std::exp(c - f[p]) - 1.0);

  // d^2/dz dzbar = (d_xx + d_yy)/4 with the full (unzeroed) wavenumbers.
  const auto k = wavenumber_table(d, false);
  std::vector<double> symbol(N);
  for (std::size_t p = 0; p < N; ++p) symbol[p] = -0.25 * (k[0][p] * k[0][p] + k[1][p] * k[1][p]);

  auto rhat = ws.forward(rhs);
  for (std::size_t p = 0; p < N; ++p) rhat[p] = p == 0 ? cplx(0.0) : rhat[p] / symbol[p];
  StationaryN1 out;
  out.u = ScalarField(d, ws.inverse_real(rhat));
  out.c = c;

  // Residual of the nonlinear equation with the same Poisson symbol.
  auto uhat = ws.forward(out.u.values);
  for (std::size_t p = 0; p < N; ++p) uhat[p] *= symbol[p];
  const auto uzz = ws.inverse_real(std::move(uhat));
  double worst = 0.0;
  for (std::size_t p = 0; p < N; ++p) {
    const double g = 1.0 + uzz[p] / g0;
    worst = std::max(worst, g > 0.0 ? std::abs(std::log(g) + f[p] - c) : INFINITY);
  }
  out.residual = worst;
  return out;
}

}  // namespace maflow
