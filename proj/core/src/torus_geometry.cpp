#include "maflow/torus_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "maflow/errors.hpp"
#include "maflow/spectral.hpp"

namespace maflow {

namespace {

void require_same(const TorusDomain& a, const TorusDomain& b, const char* op) {
  if (!(a == b)) {
    throw DomainMismatch(std::string(op) + ": fields live on different domains");
  }
}

constexpr double kDegenerateDet = 1e-12;

}  // namespace

// ---------------------------------------------------------------- domain

TorusDomain TorusDomain::make(int n, std::vector<int> counts,
                              std::vector<double> periods) {
  if (n < 1 || n > 2) {
    throw std::invalid_argument("complex dimension must be 1 or 2");
  }
  if (static_cast<int>(counts.size()) != 2 * n) {
    throw std::invalid_argument("need one grid count per real direction (2n)");
  }
  for (int c : counts) {
    if (c < 8 || c % 2 != 0) {
      throw std::invalid_argument("grid counts must be even and >= 8, got " +
                                  std::to_string(c));
    }
  }
  if (periods.empty()) periods.assign(2 * n, 1.0);
  if (static_cast<int>(periods.size()) != 2 * n) {
    throw std::invalid_argument("need one period per real direction (2n)");
  }
  for (double L : periods) {
    if (!(L > 0.0) || !std::isfinite(L)) {
      throw std::invalid_argument("periods must be positive and finite");
    }
  }
  TorusDomain d;
  d.n = n;
  d.counts = std::move(counts);
  d.periods = std::move(periods);
  return d;
}

TorusDomain TorusDomain::uniform(int n, int count, double period) {
  return make(n, std::vector<int>(2 * n, count),
              std::vector<double>(2 * n, period));
}

std::size_t TorusDomain::points() const {
  std::size_t p = 1;
  for (int c : counts) p *= static_cast<std::size_t>(c);
  return p;
}

double TorusDomain::cell_volume() const {
  double v = 1.0;
  for (int d = 0; d < real_dims(); ++d) v *= spacing(d);
  return v;
}

double TorusDomain::volume() const {
  double v = 1.0;
  for (double L : periods) v *= L;
  return v;
}

std::array<int, 4> TorusDomain::index(std::size_t point) const {
  std::array<int, 4> idx{};
  for (int d = real_dims() - 1; d >= 0; --d) {
    idx[d] = static_cast<int>(point % counts[d]);
    point /= counts[d];
  }
  return idx;
}

double TorusDomain::coordinate(std::size_t point, int dir) const {
  return index(point)[dir] * spacing(dir);
}

// ---------------------------------------------------------------- scalars

ScalarField::ScalarField(TorusDomain d, double fill)
    : domain(std::move(d)), values(domain.points(), fill) {}

ScalarField::ScalarField(TorusDomain d, std::vector<double> v)
    : domain(std::move(d)), values(std::move(v)) {
  if (values.size() != domain.points()) {
    throw std::invalid_argument("sample count does not match the grid");
  }
}

ScalarField ScalarField::sample(
    const TorusDomain& d,
    const std::function<double(std::span<const double>)>& fn) {
  ScalarField out(d);
  std::array<double, 4> x{};
  for (std::size_t p = 0; p < out.size(); ++p) {
    const auto idx = d.index(p);
    for (int k = 0; k < d.real_dims(); ++k) x[k] = idx[k] * d.spacing(k);
    out.values[p] = fn(std::span<const double>(x.data(), d.real_dims()));
  }
  return out;
}

double ScalarField::min() const {
  return *std::min_element(values.begin(), values.end());
}
double ScalarField::max() const {
  return *std::max_element(values.begin(), values.end());
}
double ScalarField::sup_abs() const {
  double s = 0.0;
  for (double v : values) s = std::max(s, std::abs(v));
  return s;
}
double ScalarField::mean() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  require_same(domain, o.domain, "ScalarField +");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
  return *this;
}
ScalarField& ScalarField::operator-=(const ScalarField& o) {
  require_same(domain, o.domain, "ScalarField -");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
  return *this;
}
ScalarField& ScalarField::operator*=(double s) {
  for (double& v : values) v *= s;
  return *this;
}
ScalarField& ScalarField::operator+=(double s) {
  for (double& v : values) v += s;
  return *this;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double s, ScalarField a) { return a *= s; }

// ---------------------------------------------------------------- matrices

PointMatrix PointMatrix::identity(int n) {
  PointMatrix m;
  m.n = n;
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

PointMatrix PointMatrix::diagonal(std::span<const double> d) {
  PointMatrix m;
  m.n = static_cast<int>(d.size());
  for (int i = 0; i < m.n; ++i) m(i, i) = d[i];
  return m;
}

PointMatrix PointMatrix::from_rows(int n, std::span<const cplx> rows) {
  if (n < 1 || n > 2 || rows.size() != static_cast<std::size_t>(n * n)) {
    throw std::invalid_argument("PointMatrix needs n*n entries with n <= 2");
  }
  PointMatrix m;
  m.n = n;
  std::copy(rows.begin(), rows.end(), m.a.begin());
  return m;
}

PointMatrix& PointMatrix::operator+=(const PointMatrix& o) {
  for (int k = 0; k < n * n; ++k) a[k] += o.a[k];
  return *this;
}
PointMatrix& PointMatrix::operator*=(double s) {
  for (int k = 0; k < n * n; ++k) a[k] *= s;
  return *this;
}
PointMatrix operator+(PointMatrix a, const PointMatrix& b) { return a += b; }
PointMatrix operator-(PointMatrix a, const PointMatrix& b) {
  for (int k = 0; k < a.n * a.n; ++k) a.a[k] -= b.a[k];
  return a;
}
PointMatrix operator*(double s, PointMatrix a) { return a *= s; }
PointMatrix operator*(const PointMatrix& a, const PointMatrix& b) {
  PointMatrix c;
  c.n = a.n;
  for (int i = 0; i < a.n; ++i)
    for (int j = 0; j < a.n; ++j) {
      cplx s = 0.0;
      for (int k = 0; k < a.n; ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

double det(const PointMatrix& m) {
  if (m.n == 1) return m(0, 0).real();
  return (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)).real();
}

PointMatrix adjugate(const PointMatrix& m) {
  PointMatrix r;
  r.n = m.n;
  if (m.n == 1) {
    r(0, 0) = 1.0;
    return r;
  }
  r(0, 0) = m(1, 1);
  r(1, 1) = m(0, 0);
  r(0, 1) = -m(0, 1);
  r(1, 0) = -m(1, 0);
  return r;
}

PointMatrix inverse(const PointMatrix& m) {
  return (1.0 / det(m)) * adjugate(m);
}

std::pair<double, double> eigen_extrema(const PointMatrix& m) {
  if (m.n == 1) return {m(0, 0).real(), m(0, 0).real()};
  const double a = m(0, 0).real();
  const double d = m(1, 1).real();
  const double half_gap = 0.5 * (a - d);
  const double r = std::sqrt(half_gap * half_gap + std::norm(m(0, 1)));
  const double mid = 0.5 * (a + d);
  return {mid - r, mid + r};
}

double hermitian_defect(const PointMatrix& m) {
  double worst = 0.0;
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j)
      worst = std::max(worst, std::abs(m(i, j) - std::conj(m(j, i))));
  return worst;
}

PointMatrix symmetrized(const PointMatrix& m) {
  PointMatrix r = m;
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) r(i, j) = 0.5 * (m(i, j) + std::conj(m(j, i)));
  return r;
}

// ---------------------------------------------------------------- fields

HermitianField::HermitianField(TorusDomain d)
    : domain(std::move(d)),
      data(domain.points() * domain.n * domain.n, cplx(0.0, 0.0)) {}

PointMatrix HermitianField::at(std::size_t p) const {
  PointMatrix m;
  m.n = domain.n;
  const std::size_t nn = domain.n * domain.n;
  std::copy_n(data.begin() + p * nn, nn, m.a.begin());
  return m;
}

void HermitianField::set(std::size_t p, const PointMatrix& m) {
  const std::size_t nn = domain.n * domain.n;
  std::copy_n(m.a.begin(), nn, data.begin() + p * nn);
}

void HermitianField::resymmetrize() {
  for (std::size_t p = 0; p < points(); ++p) set(p, symmetrized(at(p)));
}

double HermitianField::hermitian_defect() const {
  double worst = 0.0;
  for (std::size_t p = 0; p < points(); ++p)
    worst = std::max(worst, maflow::hermitian_defect(at(p)));
  return worst;
}

HermitianField operator+(const HermitianField& a, const HermitianField& b) {
  require_same(a.domain, b.domain, "HermitianField +");
  HermitianField c = a;
  for (std::size_t k = 0; k < c.data.size(); ++k) c.data[k] += b.data[k];
  c.metric = false;
  c.resymmetrize();
  return c;
}

HermitianField operator*(double s, const HermitianField& a) {
  HermitianField c = a;
  for (auto& v : c.data) v *= s;
  c.metric = a.metric && s > 0.0;
  return c;
}

HermitianField make_flat_metric(const TorusDomain& domain,
                                const PointMatrix& coeff) {
  if (coeff.n != domain.n) {
    throw DomainMismatch("coefficient size does not match complex dimension");
  }
  if (maflow::hermitian_defect(coeff) > 1e-13) {
    throw std::invalid_argument("metric coefficient is not Hermitian");
  }
  const auto [lo, hi] = eigen_extrema(coeff);
  if (!(lo > 0.0)) {
    std::ostringstream msg;
    msg << "metric coefficient is not positive definite: eigenvalue " << lo;
    throw std::invalid_argument(msg.str());
  }
  HermitianField g(domain);
  const PointMatrix c = symmetrized(coeff);
  for (std::size_t p = 0; p < g.points(); ++p) g.set(p, c);
  g.metric = true;
  return g;
}

HermitianField perturb_metric(const SpectralWorkspace& ws,
                              const HermitianField& g, const ScalarField& psi) {
  require_same(g.domain, psi.domain, "perturb_metric");
  HermitianField out = g;
  const HermitianField h = complex_hessian(ws, psi);
  for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] += h.data[k];
  out.resymmetrize();
  out.metric = false;
  if (g.metric) {
    bool positive = true;
    for (std::size_t p = 0; p < out.points() && positive; ++p)
      positive = eigen_extrema(out.at(p)).first > 0.0;
    out.metric = positive;
  }
  return out;
}

ScalarField det_field(const HermitianField& h) {
  ScalarField out(h.domain);
  for (std::size_t p = 0; p < h.points(); ++p) out[p] = det(h.at(p));
  return out;
}

HermitianField inverse_field(const HermitianField& h) {
  HermitianField out(h.domain);
  for (std::size_t p = 0; p < h.points(); ++p) {
    const PointMatrix m = h.at(p);
    const double d = det(m);
    if (!(std::abs(d) >= kDegenerateDet)) {
      std::ostringstream msg;
      msg << "degenerate matrix at grid point " << p << " (det " << d << ")";
      throw DegenerateMetric(msg.str(), p, d);
    }
    out.set(p, symmetrized((1.0 / d) * adjugate(m)));
  }
  out.metric = h.metric;
  return out;
}

ScalarField min_eigenvalue_field(const HermitianField& h) {
  ScalarField out(h.domain);
  for (std::size_t p = 0; p < h.points(); ++p)
    out[p] = eigen_extrema(h.at(p)).first;
  return out;
}

std::pair<ScalarField, ScalarField> relative_eigen_extrema(
    const HermitianField& alpha, const HermitianField& g) {
  require_same(alpha.domain, g.domain, "relative_eigen_extrema");
  ScalarField lo(g.domain), hi(g.domain);
  for (std::size_t p = 0; p < g.points(); ++p) {
    const PointMatrix a = alpha.at(p);
    const PointMatrix b = g.at(p);
    if (g.n() == 1) {
      lo[p] = hi[p] = a(0, 0).real() / b(0, 0).real();
      continue;
    }
    // Roots of det(a - lambda b) = 0 are real for b positive definite.
    const double qa = det(b);
    if (!(qa >= kDegenerateDet)) {
      throw DegenerateMetric("relative eigenvalues: reference not positive", p,
                             qa);
    }
    const double qb = -(a(0, 0) * b(1, 1) + a(1, 1) * b(0, 0) -
                        a(0, 1) * b(1, 0) - a(1, 0) * b(0, 1))
                           .real();
    const double qc = det(a);
    const double disc = std::max(0.0, qb * qb - 4.0 * qa * qc);
    const double s = std::sqrt(disc);
    // Stable quadratic roots.
    const double q = -0.5 * (qb + std::copysign(s, qb));
    double r1 = q / qa;
    double r2 = q != 0.0 ? qc / q : r1;
    if (r1 > r2) std::swap(r1, r2);
    lo[p] = r1;
    hi[p] = r2;
  }
  return {std::move(lo), std::move(hi)};
}

ScalarField trace_pair(const HermitianField& alpha, const HermitianField& g) {
  require_same(alpha.domain, g.domain, "trace_pair");
  ScalarField out(g.domain);
  const int n = g.n();
  for (std::size_t p = 0; p < g.points(); ++p) {
    const PointMatrix m = g.at(p);
    const double d = det(m);
    if (!(std::abs(d) >= kDegenerateDet)) {
      throw DegenerateMetric("trace_pair: degenerate metric at grid point " +
                                 std::to_string(p),
                             p, d);
    }
    const PointMatrix inv = (1.0 / d) * adjugate(m);
    cplx s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += inv(j, i) * alpha.entry(p, i, j);
    out[p] = s.real();
  }
  return out;
}

double integrate(const ScalarField& phi, const ScalarField& density) {
  require_same(phi.domain, density.domain, "integrate");
  double s = 0.0;
  for (std::size_t p = 0; p < phi.size(); ++p) s += phi[p] * density[p];
  return s * phi.domain.cell_volume();
}

double integrate(const ScalarField& phi) {
  double s = 0.0;
  for (double v : phi.values) s += v;
  return s * phi.domain.cell_volume();
}

}  // namespace maflow
