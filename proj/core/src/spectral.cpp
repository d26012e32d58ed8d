#include "maflow/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "maflow/errors.hpp"

namespace maflow {

namespace {

// The FFTW planner is not thread-safe; execution with the new-array API is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

struct SpectralWorkspace::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

int SpectralWorkspace::integer_wavenumber(int j, int count) {
  return j <= count / 2 ? j : j - count;
}

bool SpectralWorkspace::in_dealias_band(int k, int count) {
  return 3 * std::abs(k) <= count;
}

SpectralWorkspace::SpectralWorkspace(TorusDomain domain)
    : domain_(std::move(domain)),
      points_(domain_.points()),
      plans_(std::make_unique<Plans>()) {
  const int dims = domain_.real_dims();
  const int n = domain_.n;
  k_.assign(dims, std::vector<double>(points_));
  dz_.assign(n, std::vector<cplx>(points_));
  dzbar_.assign(n, std::vector<cplx>(points_));
  mask_.assign(points_, 1);

  for (std::size_t p = 0; p < points_; ++p) {
    const auto idx = domain_.index(p);
    for (int d = 0; d < dims; ++d) {
      const int N = domain_.counts[d];
      const int kint = integer_wavenumber(idx[d], N);
      const bool nyquist = 2 * idx[d] == N;
      k_[d][p] = nyquist ? 0.0 : 2.0 * std::numbers::pi * kint / domain_.periods[d];
      if (!in_dealias_band(kint, N)) mask_[p] = 0;
    }
    for (int i = 0; i < n; ++i) {
      const double kx = k_[2 * i][p];
      const double ky = k_[2 * i + 1][p];
      dz_[i][p] = 0.5 * cplx(ky, kx);      // (i kx + ky) / 2
      dzbar_[i][p] = 0.5 * cplx(-ky, kx);  // (i kx - ky) / 2
    }
  }

  std::vector<int> dims_v(domain_.counts.begin(), domain_.counts.end());
  std::vector<cplx> scratch_in(points_), scratch_out(points_);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  std::lock_guard<std::mutex> lock(planner_mutex());
  plans_->forward =
      fftw_plan_dft(dims, dims_v.data(), as_fftw(scratch_in.data()),
                    as_fftw(scratch_out.data()), FFTW_FORWARD, flags);
  plans_->backward =
      fftw_plan_dft(dims, dims_v.data(), as_fftw(scratch_in.data()),
                    as_fftw(scratch_out.data()), FFTW_BACKWARD, flags);
  if (!plans_->forward || !plans_->backward) {
    throw std::runtime_error("FFTW planning failed");
  }
}

SpectralWorkspace::~SpectralWorkspace() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (plans_->forward) fftw_destroy_plan(plans_->forward);
  if (plans_->backward) fftw_destroy_plan(plans_->backward);
}

std::vector<cplx> SpectralWorkspace::forward(std::span<const double> real) const {
  std::vector<cplx> in(real.begin(), real.end());
  return forward(std::span<const cplx>(in));
}

std::vector<cplx> SpectralWorkspace::forward(std::span<const cplx> values) const {
  if (values.size() != points_) {
    throw DomainMismatch("forward transform: wrong sample count");
  }
  std::vector<cplx> in(values.begin(), values.end());
  std::vector<cplx> out(points_);
  fftw_execute_dft(plans_->forward, as_fftw(in.data()), as_fftw(out.data()));
  return out;
}

void SpectralWorkspace::inverse(std::vector<cplx>& spectrum) const {
  if (spectrum.size() != points_) {
    throw DomainMismatch("inverse transform: wrong sample count");
  }
  fftw_execute_dft(plans_->backward, as_fftw(spectrum.data()),
                   as_fftw(spectrum.data()));
  const double scale = 1.0 / static_cast<double>(points_);
  for (auto& v : spectrum) v *= scale;
}

std::vector<double> SpectralWorkspace::inverse_real(std::vector<cplx> spectrum) const {
  inverse(spectrum);
  std::vector<double> out(points_);
  for (std::size_t p = 0; p < points_; ++p) out[p] = spectrum[p].real();
  return out;
}

// ---------------------------------------------------------------- operators

namespace {

void require_domain(const SpectralWorkspace& ws, const TorusDomain& d) {
  if (!(ws.domain() == d)) {
    throw DomainMismatch("field does not live on the workspace domain");
  }
}

}  // namespace

ScalarField partial(const SpectralWorkspace& ws, const ScalarField& u, int dir) {
  require_domain(ws, u.domain);
  auto spec = ws.forward(u.values);
  const auto k = ws.wavenumbers(dir);
  for (std::size_t p = 0; p < spec.size(); ++p) spec[p] *= cplx(0.0, k[p]);
  return ScalarField(u.domain, ws.inverse_real(std::move(spec)));
}

HermitianField complex_hessian(const SpectralWorkspace& ws, const ScalarField& u) {
  require_domain(ws, u.domain);
  const int n = u.domain.n;
  const std::size_t N = ws.points();
  HermitianField h(u.domain);
  const auto uhat = ws.forward(u.values);

  // Diagonal entries are real fields; pack u_{1 1bar} + i u_{2 2bar} into a
  // single inverse transform.
  std::vector<cplx> diag(N);
  const auto dz0 = ws.dz_symbol(0);
  const auto db0 = ws.dzbar_symbol(0);
  if (n == 1) {
    for (std::size_t p = 0; p < N; ++p) diag[p] = dz0[p] * db0[p] * uhat[p];
    ws.inverse(diag);
    for (std::size_t p = 0; p < N; ++p) h.data[p] = cplx(diag[p].real(), 0.0);
    return h;
  }

  const auto dz1 = ws.dz_symbol(1);
  const auto db1 = ws.dzbar_symbol(1);
  const cplx I(0.0, 1.0);
  std::vector<cplx> off(N);
  for (std::size_t p = 0; p < N; ++p) {
    diag[p] = (dz0[p] * db0[p] + I * dz1[p] * db1[p]) * uhat[p];
    off[p] = dz0[p] * db1[p] * uhat[p];
  }
  ws.inverse(diag);
  ws.inverse(off);
  for (std::size_t p = 0; p < N; ++p) {
    h.entry(p, 0, 0) = diag[p].real();
    h.entry(p, 1, 1) = diag[p].imag();
    h.entry(p, 0, 1) = off[p];
    h.entry(p, 1, 0) = std::conj(off[p]);
  }
  return h;
}

ScalarField laplacian(const SpectralWorkspace& ws, const ScalarField& u,
                      const HermitianField& g) {
  return trace_pair(complex_hessian(ws, u), g);
}

ScalarField gradient_norm_sq(const SpectralWorkspace& ws, const ScalarField& u,
                             const HermitianField& g) {
  require_domain(ws, u.domain);
  const int n = u.domain.n;
  const std::size_t N = ws.points();
  const auto uhat = ws.forward(u.values);
  std::vector<std::vector<cplx>> grad(n, std::vector<cplx>(N));
  for (int i = 0; i < n; ++i) {
    const auto s = ws.dz_symbol(i);
    for (std::size_t p = 0; p < N; ++p) grad[i][p] = s[p] * uhat[p];
    ws.inverse(grad[i]);
  }
  const HermitianField ginv = inverse_field(g);
  ScalarField out(u.domain);
  for (std::size_t p = 0; p < N; ++p) {
    // a^* P a with a_i = du/dz^i and P = g^{-1}.
    cplx s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        s += std::conj(grad[j][p]) * ginv.entry(p, j, i) * grad[i][p];
    out[p] = s.real();
  }
  return out;
}

ScalarField mean_normalize(const ScalarField& u, const ScalarField& density) {
  const double mass = integrate(density);
  const double avg = integrate(u, density) / mass;
  ScalarField out = u;
  out += -avg;
  return out;
}

ScalarField third_order_S(const SpectralWorkspace& ws, const ScalarField& u,
                          const HermitianField& g_tilde) {
  require_domain(ws, u.domain);
  const int n = u.domain.n;
  const std::size_t N = ws.points();
  const auto uhat = ws.forward(u.values);

  // T[(i*n + j)*n + k] = u_{i jbar k}; symmetric in i <-> k.
  const int count = n * n * n;
  std::vector<std::vector<cplx>> T(count);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const int slot = (i * n + j) * n + k;
        if (k < i) {
          T[slot] = T[(k * n + j) * n + i];
          continue;
        }
        const auto si = ws.dz_symbol(i);
        const auto tj = ws.dzbar_symbol(j);
        const auto sk = ws.dz_symbol(k);
        std::vector<cplx> v(N);
        for (std::size_t p = 0; p < N; ++p) v[p] = si[p] * tj[p] * sk[p] * uhat[p];
        ws.inverse(v);
        T[slot] = std::move(v);
      }

  const HermitianField P = inverse_field(g_tilde);
  ScalarField out(u.domain);
  for (std::size_t p = 0; p < N; ++p) {
    const PointMatrix m = P.at(p);
    cplx s = 0.0;
    for (int r = 0; r < n; ++r)
      for (int sidx = 0; sidx < n; ++sidx)
        for (int t = 0; t < n; ++t) {
          const cplx left = std::conj(T[(r * n + sidx) * n + t][p]);
          if (left == 0.0) continue;
          cplx acc = 0.0;
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              for (int k = 0; k < n; ++k)
                acc += m(r, i) * m(j, sidx) * m(t, k) * T[(i * n + j) * n + k][p];
          s += left * acc;
        }
    out[p] = s.real();
  }
  return out;
}

ScalarField dealias(const SpectralWorkspace& ws, const ScalarField& u) {
  require_domain(ws, u.domain);
  auto spec = ws.forward(u.values);
  for (std::size_t p = 0; p < spec.size(); ++p)
    if (!ws.keeps(p)) spec[p] = 0.0;
  return ScalarField(u.domain, ws.inverse_real(std::move(spec)));
}

}  // namespace maflow
