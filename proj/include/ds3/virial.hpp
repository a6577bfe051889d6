#pragma once

#include <array>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "ds3/functionals.hpp"
#include "ds3/ground_state.hpp"

namespace ds3 {

// ---------------------------------------------------------------------------
// Localization weight rho(x) = x1^2 + R^2 psi(|xbar|^2 / R^2), built from a
// normalized bump eta via psi(r) = r - int_0^r (r-s) eta(s) ds. The
// transverse weight interpolates |xbar|^2 inside radius R and a constant
// plateau past sqrt(2) R, so the virial identity keeps its focusing core
// while every boundary term dies.
// ---------------------------------------------------------------------------

namespace bump {

// raw bump exp(-1/((s-1)(2-s))) on (1,2), with first two derivatives.
// q = (s-1)(2-s); all derivatives carry the factor exp(-1/q), which
// flushes to zero fast enough to dominate any 1/q power.
inline double raw(double s) {
  double q = (s - 1.0) * (2.0 - s);
  if (q <= 0.0 || 1.0 / q > 700.0) return 0.0;
  return std::exp(-1.0 / q);
}

inline double raw_d1(double s) {
  double q = (s - 1.0) * (2.0 - s);
  if (q <= 0.0 || 1.0 / q > 700.0) return 0.0;
  double qp = 3.0 - 2.0 * s;
  return qp / (q * q) * std::exp(-1.0 / q);
}

inline double raw_d2(double s) {
  double q = (s - 1.0) * (2.0 - s);
  if (q <= 0.0 || 1.0 / q > 700.0) return 0.0;
  double qp = 3.0 - 2.0 * s;
  double phi1 = qp / (q * q);                           // (-1/q)'
  double phi2 = (-2.0 * q - 2.0 * qp * qp) / (q * q * q);  // (-1/q)''
  return (phi2 + phi1 * phi1) * std::exp(-1.0 / q);
}

}  // namespace bump

namespace detail {

// 8-point Gauss-Legendre on [-1, 1]
inline constexpr std::array<double, 4> gl_x = {
    0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
    0.9602898564975363};
inline constexpr std::array<double, 4> gl_w = {
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
    0.1012285362903763};

template <class F>
double gl8(F&& f, double a, double b) {
  double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double s = 0.0;
  for (int i = 0; i < 4; ++i)
    s += gl_w[i] * (f(c - h * gl_x[i]) + f(c + h * gl_x[i]));
  return s * h;
}

template <class F>
double adaptive_simpson_rec(F& f, double a, double b, double fa, double fm,
                            double fb, double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol,
                              depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol,
                              depth - 1);
}

template <class F>
double adaptive_simpson(F f, double a, double b, double tol) {
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

// natural cubic spline through (x_i, y_i); second derivatives at the ends
// are zero. Used only for user-supplied eta tables.
struct CubicSpline {
  std::vector<double> x, y, ypp;

  void build(std::vector<double> xs, std::vector<double> ys) {
    x = std::move(xs);
    y = std::move(ys);
    std::size_t n = x.size();
    ypp.assign(n, 0.0);
    if (n < 3) return;
    std::vector<double> u(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      double sig = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1]);
      double p = sig * ypp[i - 1] + 2.0;
      ypp[i] = (sig - 1.0) / p;
      u[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]) -
             (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
      u[i] = (6.0 * u[i] / (x[i + 1] - x[i - 1]) - sig * u[i - 1]) / p;
    }
    for (std::size_t k = n - 1; k-- > 0;) ypp[k] = ypp[k] * ypp[k + 1] + u[k];
  }

  std::size_t locate(double t) const {
    std::size_t lo = 0, hi = x.size() - 1;
    while (hi - lo > 1) {
      std::size_t mid = (lo + hi) / 2;
      (x[mid] > t ? hi : lo) = mid;
    }
    return lo;
  }

  double eval(double t, int deriv = 0) const {
    if (x.empty()) return 0.0;
    if (t <= x.front() || t >= x.back()) return 0.0;
    std::size_t i = locate(t);
    double h = x[i + 1] - x[i];
    double a = (x[i + 1] - t) / h, b = (t - x[i]) / h;
    if (deriv == 0)
      return a * y[i] + b * y[i + 1] +
             ((a * a * a - a) * ypp[i] + (b * b * b - b) * ypp[i + 1]) *
                 (h * h) / 6.0;
    if (deriv == 1)
      return (y[i + 1] - y[i]) / h -
             (3.0 * a * a - 1.0) / 6.0 * h * ypp[i] +
             (3.0 * b * b - 1.0) / 6.0 * h * ypp[i + 1];
    return a * ypp[i] + b * ypp[i + 1];
  }
};

}  // namespace detail

struct EtaSpec {
  enum class Kind { analytic_bump, quadratic, table };
  Kind kind = Kind::analytic_bump;
  // raw (unnormalized) samples on [1, 2] for Kind::table
  std::vector<std::pair<double, double>> samples;

  static EtaSpec analytic() { return {}; }
  static EtaSpec quadratic_surrogate() {
    EtaSpec e;
    e.kind = Kind::quadratic;
    return e;
  }
  static EtaSpec from_table(std::vector<std::pair<double, double>> s) {
    EtaSpec e;
    e.kind = Kind::table;
    e.samples = std::move(s);
    return e;
  }
  const char* name() const {
    switch (kind) {
      case Kind::analytic_bump: return "analytic_bump";
      case Kind::quadratic: return "quadratic";
      default: return "table";
    }
  }
};

// One-dimensional psi with all four derivatives. Cumulative integrals
// H(r) = int eta and J(r) = int s eta are tabulated on [1, 2] with composite
// Gauss-Legendre panels and evaluated by cubic Hermite interpolation (the
// exact slopes H' = eta, J' = r eta are known at the nodes).
class PsiCurve {
 public:
  struct Jet {
    double psi, d1, d2, d3, d4;
  };

  explicit PsiCurve(const EtaSpec& spec, int panels = 2048) : spec_(spec) {
    if (spec.kind == EtaSpec::Kind::quadratic) return;
    if (spec.kind == EtaSpec::Kind::table) {
      if (spec.samples.size() < 4)
        throw config_error("eta table: need at least 4 samples");
      std::vector<double> xs, ys;
      for (auto& [s, v] : spec.samples) {
        if (s < 1.0 || s > 2.0)
          throw config_error("eta table: samples must lie in [1, 2]");
        if (v < 0.0) throw config_error("eta table: eta must be nonnegative");
        xs.push_back(s);
        ys.push_back(v);
      }
      spline_.build(std::move(xs), std::move(ys));
    }

    panels_ = panels;
    H_.assign(panels_ + 1, 0.0);
    J_.assign(panels_ + 1, 0.0);
    double h = 1.0 / panels_;
    CompensatedSum accH, accJ;
    for (int i = 0; i < panels_; ++i) {
      double a = 1.0 + i * h, b = a + h;
      accH.add(detail::gl8([this](double s) { return raw_eta(s); }, a, b));
      accJ.add(detail::gl8([this](double s) { return s * raw_eta(s); }, a, b));
      H_[i + 1] = accH.value();
      J_[i + 1] = accJ.value();
    }
    raw_integral_ = H_[panels_];
    if (!(raw_integral_ > 0.0))
      throw config_error("eta: raw profile integrates to zero");
    norm_ = 1.0 / raw_integral_;
    for (auto& v : H_) v *= norm_;
    for (auto& v : J_) v *= norm_;
    plateau_ = 2.0 - 2.0 * H_.back() + J_.back();  // = J(2) once H(2) = 1

    // independent adaptive-quadrature cross-check of the normalization
    raw_integral_adaptive_ = detail::adaptive_simpson(
        [this](double s) { return raw_eta(s); }, 1.0, 2.0, 1e-14);
  }

  bool trivial() const { return spec_.kind == EtaSpec::Kind::quadratic; }

  // normalized eta and derivatives
  double eta(double s) const { return norm_ * raw_eta(s); }
  double eta_d1(double s) const { return norm_ * raw_eta_d1(s); }
  double eta_d2(double s) const { return norm_ * raw_eta_d2(s); }

  Jet eval(double r) const {
    if (trivial() || r <= 1.0) return {r, 1.0, 0.0, 0.0, 0.0};
    if (r >= 2.0) return {plateau_, 0.0, 0.0, 0.0, 0.0};
    double t = (r - 1.0) * panels_;
    int i = std::min(int(t), panels_ - 1);
    double h = 1.0 / panels_;
    double a = 1.0 + i * h;
    double x = (r - a) / h;
    auto hermite = [&](const std::vector<double>& F, double da,
                       double db) {
      double x2 = x * x, x3 = x2 * x;
      return F[i] * (2 * x3 - 3 * x2 + 1) + F[i + 1] * (3 * x2 - 2 * x3) +
             h * (da * (x3 - 2 * x2 + x) + db * (x3 - x2));
    };
    double H = hermite(H_, eta(a), eta(a + h));
    double J = hermite(J_, a * eta(a), (a + h) * eta(a + h));
    Jet j;
    j.psi = r - r * H + J;
    j.d1 = 1.0 - H;
    j.d2 = -eta(r);
    j.d3 = -eta_d1(r);
    j.d4 = -eta_d2(r);
    return j;
  }

  double normalization() const { return norm_; }
  double raw_integral() const { return raw_integral_; }
  double raw_integral_adaptive() const { return raw_integral_adaptive_; }
  double plateau() const { return trivial() ? 0.0 : plateau_; }
  const EtaSpec& spec() const { return spec_; }
  // table bytes for checksumming
  const std::vector<double>& h_table() const { return H_; }

 private:
  double raw_eta(double s) const {
    if (spec_.kind == EtaSpec::Kind::analytic_bump) return bump::raw(s);
    return std::max(0.0, spline_.eval(s, 0));
  }
  double raw_eta_d1(double s) const {
    if (spec_.kind == EtaSpec::Kind::analytic_bump) return bump::raw_d1(s);
    return spline_.eval(s, 1);
  }
  double raw_eta_d2(double s) const {
    if (spec_.kind == EtaSpec::Kind::analytic_bump) return bump::raw_d2(s);
    return spline_.eval(s, 2);
  }

  EtaSpec spec_;
  detail::CubicSpline spline_;
  int panels_ = 0;
  std::vector<double> H_, J_;
  double raw_integral_ = 0.0, raw_integral_adaptive_ = 0.0;
  double norm_ = 1.0, plateau_ = 0.0;
};

// Cached per-grid-point geometry of the weight. All derivative fields come
// from the 1-D closed forms composed with s = |xbar|^2/R^2 (chain rule), not
// from spectral differentiation of the sampled weight.
struct LocalizationProfile {
  double R = 0.0;
  GridSpec grid;
  EtaSpec eta_spec;
  std::shared_ptr<const PsiCurve> psi;

  RealField rho;     // x1^2 + R^2 psi(s)
  RealField psiR;    // R^2 psi(s)
  RealField dpsi;    // psi'(s)
  RealField d2psi;   // psi''(s)
  RealField lap;     // lap_xbar psi_R = 4 psi' + 4 s psi''
  RealField bilap;   // lap^2_xbar psi_R = (32 psi'' + 64 s psi''' + 16 s^2 psi'''')/R^2
};

inline LocalizationProfile build_profile(double R, const GridSpec& g,
                                         const EtaSpec& spec = {}) {
  if (!(R > 0.0)) throw config_error("profile: R must be positive");
  LocalizationProfile prof;
  prof.R = R;
  prof.grid = g;
  prof.eta_spec = spec;
  prof.psi = std::make_shared<PsiCurve>(spec);
  bool trivial = prof.psi->trivial();
  if (!trivial) {
    double half = 0.5 * std::min(g.L2, g.L3);
    if (!(R * std::sqrt(2.0) < half))
      throw config_error("profile: R too large, weight support leaves the box");
  }

  prof.rho = RealField(g);
  prof.psiR = RealField(g);
  prof.dpsi = RealField(g);
  prof.d2psi = RealField(g);
  prof.lap = RealField(g);
  prof.bilap = RealField(g);
  double R2 = R * R;
  std::size_t p = 0;
  for (int i1 = 0; i1 < g.n1; ++i1) {
    double x1 = g.coord(0, i1);
    for (int i2 = 0; i2 < g.n2; ++i2) {
      double x2 = g.coord(1, i2);
      for (int i3 = 0; i3 < g.n3; ++i3, ++p) {
        double x3 = g.coord(2, i3);
        double s = (x2 * x2 + x3 * x3) / R2;
        auto j = prof.psi->eval(s);
        prof.psiR.v[p] = R2 * j.psi;
        prof.rho.v[p] = x1 * x1 + R2 * j.psi;
        prof.dpsi.v[p] = j.d1;
        prof.d2psi.v[p] = j.d2;
        prof.lap.v[p] = 4.0 * j.d1 + 4.0 * s * j.d2;
        prof.bilap.v[p] =
            (32.0 * j.d2 + 64.0 * s * j.d3 + 16.0 * s * s * j.d4) / R2;
      }
    }
  }
  return prof;
}

// V_rho = int rho |u|^2
inline double virial_value(const ComplexField& u,
                           const LocalizationProfile& prof) {
  check_same_grid(u.grid, prof.grid, "virial_value");
  CompensatedSum s;
  for (std::size_t i = 0; i < u.v.size(); ++i)
    s.add(prof.rho.v[i] * std::norm(u.v[i]));
  return s.value() * u.grid.cell_volume();
}

// dV/dt = 2 Im int grad rho . grad u conj(u)
inline double virial_first_derivative(const ComplexField& u,
                                      const LocalizationProfile& prof) {
  check_same_grid(u.grid, prof.grid, "virial_first_derivative");
  auto grad = gradient(u);
  const GridSpec& g = u.grid;
  CompensatedSum acc;
  std::size_t p = 0;
  for (int i1 = 0; i1 < g.n1; ++i1) {
    double x1 = g.coord(0, i1);
    for (int i2 = 0; i2 < g.n2; ++i2) {
      double x2 = g.coord(1, i2);
      for (int i3 = 0; i3 < g.n3; ++i3, ++p) {
        double x3 = g.coord(2, i3);
        double w = prof.dpsi.v[p];
        cplx ub = std::conj(u.v[p]);
        double im1 = (grad[0].v[p] * ub).imag();
        double im2 = (grad[1].v[p] * ub).imag();
        double im3 = (grad[2].v[p] * ub).imag();
        acc.add(2.0 * x1 * im1 + 2.0 * w * (x2 * im2 + x3 * im3));
      }
    }
  }
  return 2.0 * acc.value() * g.cell_volume();
}

struct VirialReport {
  double V = 0.0;
  double dVdt_analytic = 0.0;
  double d2V_rhs_exact = 0.0;
  // the five labelled contributions, in display order: the P-like leading
  // block, the transverse-geometry block, the power correction, and the two
  // nonlocal blocks (transverse and axial)
  double term_leading = 0.0;
  double term_local_geometry = 0.0;
  double term_power_correction = 0.0;
  double term_nonlocal_transverse = 0.0;
  double term_nonlocal_axial = 0.0;
  double term_sum = 0.0;
  double d2V_fd = std::numeric_limits<double>::quiet_NaN();
};

// The exact second-derivative identity, evaluated two ways:
//   d2V/dt2 = 4 int <Hess rho grad u, grad u> - int Lap^2 rho |u|^2
//             - (2 c1 a)/(a+2) int Lap rho |u|^(a+2)
//             + 2 c2 int grad rho . grad(E1 m) m,     m = |u|^2
// once as the labelled five-term bookkeeping, once unsplit. Both use the
// same discrete ingredients, so term_sum and d2V_rhs_exact must agree to
// roundoff; the algebra differs, the data does not.
inline VirialReport virial_second_rhs(const ComplexField& u,
                                      const SimParams& p,
                                      const LocalizationProfile& prof) {
  check_same_grid(u.grid, prof.grid, "virial_second_rhs");
  const GridSpec& g = u.grid;
  double h3 = g.cell_volume();

  auto grad = gradient(u);

  // E1 m and its gradient, sharing one forward transform of m
  ComplexField mhat(g);
  for (std::size_t i = 0; i < u.v.size(); ++i)
    mhat.v[i] = cplx(std::norm(u.v[i]), 0.0);
  fft::forward_inplace(g, mhat.v.data());
  auto sig = e1_multiplier(g);
  for (std::size_t i = 0; i < mhat.v.size(); ++i) mhat.v[i] *= sig.symbol[i];
  std::array<ComplexField, 3> gradE = {ComplexField(g), ComplexField(g),
                                       ComplexField(g)};
  for (int a = 0; a < 3; ++a) {
    auto xi = detail::axis_freqs(g, a, true);
    std::size_t q = 0;
    for (int k1 = 0; k1 < g.n1; ++k1)
      for (int k2 = 0; k2 < g.n2; ++k2)
        for (int k3 = 0; k3 < g.n3; ++k3, ++q) {
          double w = a == 0 ? xi[k1] : (a == 1 ? xi[k2] : xi[k3]);
          gradE[a].v[q] = mhat.v[q] * cplx(0.0, w);
        }
    fft::inverse_inplace(g, gradE[a].v.data());
  }

  double R2 = prof.R * prof.R;
  double apow = 0.5 * (p.alpha + 2.0);
  CompensatedSum K1, K23, Hess, Bil, Pow, Pow4W, Pow2W, T15, T16, Vacc, D1acc;
  std::size_t q = 0;
  for (int i1 = 0; i1 < g.n1; ++i1) {
    double x1 = g.coord(0, i1);
    for (int i2 = 0; i2 < g.n2; ++i2) {
      double x2 = g.coord(1, i2);
      for (int i3 = 0; i3 < g.n3; ++i3, ++q) {
        double x3 = g.coord(2, i3);
        double m = std::norm(u.v[q]);
        double g1 = std::norm(grad[0].v[q]);
        double g2 = std::norm(grad[1].v[q]);
        double g3 = std::norm(grad[2].v[q]);
        K1.add(g1);
        K23.add(g2 + g3);
        // exact Hessian quadratic form of psi_R
        cplx radial = x2 * grad[1].v[q] + x3 * grad[2].v[q];
        Hess.add(2.0 * prof.dpsi.v[q] * (g2 + g3) +
                 4.0 / R2 * prof.d2psi.v[q] * std::norm(radial));
        Bil.add(prof.bilap.v[q] * m);
        double mp = std::pow(m, apow);
        Pow.add(mp);
        Pow4W.add((4.0 - prof.lap.v[q]) * mp);
        Pow2W.add((2.0 + prof.lap.v[q]) * mp);
        double e1 = gradE[0].v[q].real();
        double e2 = gradE[1].v[q].real();
        double e3 = gradE[2].v[q].real();
        T15.add(2.0 * prof.dpsi.v[q] * (x2 * e2 + x3 * e3) * m);
        T16.add(x1 * e1 * m);
        Vacc.add(prof.rho.v[q] * m);
        cplx ub = std::conj(u.v[q]);
        D1acc.add(2.0 * x1 * (grad[0].v[q] * ub).imag() +
                  2.0 * prof.dpsi.v[q] * (x2 * (grad[1].v[q] * ub).imag() +
                                          x3 * (grad[2].v[q] * ub).imag()));
      }
    }
  }

  double k1 = K1.value() * h3, k23 = K23.value() * h3;
  double hess = Hess.value() * h3, bil = Bil.value() * h3;
  double pw = Pow.value() * h3, pw4 = Pow4W.value() * h3,
         pw2 = Pow2W.value() * h3;
  double t15 = 2.0 * p.c2 * T15.value() * h3;
  double t16 = 4.0 * p.c2 * T16.value() * h3;
  double a_over = p.c1 * p.alpha / (p.alpha + 2.0);

  VirialReport rep;
  rep.V = Vacc.value() * h3;
  rep.dVdt_analytic = 2.0 * D1acc.value() * h3;
  rep.term_leading = 8.0 * (k1 + k23) - 12.0 * a_over * pw;
  rep.term_local_geometry = -bil - (8.0 * k23 - 4.0 * hess);
  rep.term_power_correction = 2.0 * a_over * pw4;
  rep.term_nonlocal_transverse = t15;
  rep.term_nonlocal_axial = t16;
  rep.term_sum = rep.term_leading + rep.term_local_geometry +
                 rep.term_power_correction + rep.term_nonlocal_transverse +
                 rep.term_nonlocal_axial;
  rep.d2V_rhs_exact =
      8.0 * k1 + 4.0 * hess - bil - 2.0 * a_over * pw2 + t15 + t16;
  return rep;
}

// || lap_xbar psi_R (spectral) - lap_xbar psi_R (closed form) ||_2 relative;
// the sampled weight is smooth and periodic (constant near the boundary), so
// spectral differentiation must reproduce the chain-rule tables
inline double profile_spectral_crosscheck(const LocalizationProfile& prof) {
  const GridSpec& g = prof.grid;
  ComplexField w(g);
  for (std::size_t i = 0; i < w.v.size(); ++i) w.v[i] = prof.psiR.v[i];
  fft::forward_inplace(g, w.v.data());
  std::size_t q = 0;
  for (int k1 = 0; k1 < g.n1; ++k1)
    for (int k2 = 0; k2 < g.n2; ++k2) {
      double b = sq(g.freq(1, k2));
      for (int k3 = 0; k3 < g.n3; ++k3, ++q)
        w.v[q] *= -(b + sq(g.freq(2, k3)));
    }
  fft::inverse_inplace(g, w.v.data());
  CompensatedSum err, ref;
  for (std::size_t i = 0; i < w.v.size(); ++i) {
    err.add(sq(w.v[i].real() - prof.lap.v[i]));
    ref.add(sq(prof.lap.v[i]));
  }
  return std::sqrt(err.value() / ref.value());
}

// 2 int x . grad(E1 f) f = -3 int E1(f) f for real f well localized in the
// box; exact on the whole space by scaling, so the returned relative
// deviation measures periodization plus resolution error
inline double cipolatti_identity_check(const ComplexField& f) {
  const GridSpec& g = f.grid;
  ComplexField fhat = fft::forward(f);
  auto sig = e1_multiplier(g);
  for (std::size_t i = 0; i < fhat.v.size(); ++i) fhat.v[i] *= sig.symbol[i];
  ComplexField e1f = fhat;
  fft::inverse_inplace(g, e1f.v.data());

  std::array<ComplexField, 3> gradE = {ComplexField(g), ComplexField(g),
                                       ComplexField(g)};
  for (int a = 0; a < 3; ++a) {
    auto xi = detail::axis_freqs(g, a, true);
    std::size_t q = 0;
    for (int k1 = 0; k1 < g.n1; ++k1)
      for (int k2 = 0; k2 < g.n2; ++k2)
        for (int k3 = 0; k3 < g.n3; ++k3, ++q) {
          double w = a == 0 ? xi[k1] : (a == 1 ? xi[k2] : xi[k3]);
          gradE[a].v[q] = fhat.v[q] * cplx(0.0, w);
        }
    fft::inverse_inplace(g, gradE[a].v.data());
  }

  CompensatedSum lhs_acc, rhs_acc;
  std::size_t q = 0;
  for (int i1 = 0; i1 < g.n1; ++i1) {
    double x1 = g.coord(0, i1);
    for (int i2 = 0; i2 < g.n2; ++i2) {
      double x2 = g.coord(1, i2);
      for (int i3 = 0; i3 < g.n3; ++i3, ++q) {
        double x3 = g.coord(2, i3);
        double fr = f.v[q].real();
        lhs_acc.add((x1 * gradE[0].v[q].real() + x2 * gradE[1].v[q].real() +
                     x3 * gradE[2].v[q].real()) *
                    fr);
        rhs_acc.add(e1f.v[q].real() * fr);
      }
    }
  }
  double lhs = 2.0 * lhs_acc.value();
  double rhs = -3.0 * rhs_acc.value();
  double scale = std::max(std::abs(rhs), 1e-300);
  return std::abs(lhs - rhs) / scale;
}

// ---------------------------------------------------------------------------
// Blow-up criterion: S(u0) < S(G), P(u0) < 0, cylindrical data, alpha in
// [4/3, 2]. The threshold S(G) comes from a certified profile.
// ---------------------------------------------------------------------------

struct CriterionOptions {
  // tolerance for the symmetry membership test; grid profiles carry an
  // intrinsic anisotropy floor set by the box size (about 2e-4 at L=12,
  // 1e-5 at L=16), while genuinely angular data sits at 1e-2 or worse, so
  // 1e-3 separates the two with margin on any reasonable box
  double sigma1_tol = 1e-3;
};

struct CriterionVerdict {
  double S_u0 = 0.0, S_G = 0.0, P_u0 = 0.0;
  bool in_sigma1 = false;
  bool alpha_in_window = false;
  bool satisfied = false;
  double margin_S = 0.0;  // S_G - S_u0
  double margin_P = 0.0;  // -P_u0
  double sigma1_deviation = 0.0;
};

inline CriterionVerdict criterion_check(const ComplexField& u0,
                                        const SimParams& p,
                                        const GroundStateResult& gs,
                                        const Certification& cert,
                                        const CriterionOptions& opts = {}) {
  if (!gs.converged || !cert.passed)
    throw usage_error("criterion_check: ground state profile not certified");
  if (std::abs(gs.params.c1 - p.c1) + std::abs(gs.params.c2 - p.c2) +
          std::abs(gs.params.alpha - p.alpha) >
      1e-12)
    throw usage_error("criterion_check: ground state solved for different parameters");
  CriterionVerdict v;
  v.S_G = cert.action_S;
  Primitives pr = primitives(u0, p);
  v.S_u0 = action_of(pr, p);
  v.P_u0 = pohozaev_of(pr, p);
  auto cyl = is_cylindrical(u0, opts.sigma1_tol);
  v.in_sigma1 = cyl.ok;
  v.sigma1_deviation = cyl.deviation;
  v.alpha_in_window = p.alpha_in_criterion_window();
  v.margin_S = v.S_G - v.S_u0;
  v.margin_P = -v.P_u0;
  v.satisfied =
      (v.S_u0 < v.S_G) && (v.P_u0 < 0.0) && v.in_sigma1 && v.alpha_in_window;
  return v;
}

}  // namespace ds3
