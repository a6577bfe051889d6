#pragma once

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <string>
#include <vector>

#include "ds3/common.hpp"
#include "ds3/fft.hpp"
#include "ds3/field.hpp"
#include "ds3/functionals.hpp"
#include "ds3/grid.hpp"
#include "ds3/rng.hpp"
#include "ds3/spectral.hpp"

// Far-field behavior of the nonlocal operator, probed two ways: pairings of
// E1^k across separated cylindrical supports (the kernel decay law) and L4
// tails of random cylindrical fields against their gradient norm (the trace
// embedding). Both are measurements, not proofs; geometry is capped so the
// periodic images stay subdominant.

namespace ds3 {

namespace detail {

// C-infinity bump exp(-1/(1-t^2)) on (-1,1), zero outside; the same family
// as the localization weight, so supports are exact and quadratures spectral
inline double bump_unit(double t) {
  double q = 1.0 - t * t;
  if (q <= 0.0 || 1.0 / q > 700.0) return 0.0;
  return std::exp(-1.0 / q);
}

// two-sided Student t quantile at 95% for small residual dof
inline double t95(int dof) {
  static const double tab[] = {12.706, 4.303, 3.182, 2.776, 2.571,
                               2.447,  2.365, 2.306, 2.262, 2.228};
  if (dof < 1) return std::numeric_limits<double>::quiet_NaN();
  return dof <= 10 ? tab[dof - 1] : 1.96 + 5.0 / double(dof);
}

}  // namespace detail

// ---------------------------------------------------------------- decay law

struct DecayExperimentSpec {
  std::string op = "E1";  // "E1" | "E1sq"
  // supports: g inside {|xbar| <= gamma1 R}, f inside {|xbar| >= gamma2 R}
  double gamma1 = 1.0;
  double gamma2 = 2.5;
  std::vector<double> R_values;
  double ring_width = 1.0;  // outer annulus width, in units of R
  // Axial half-width of both bumps, absolute. Kept fixed and small against
  // the transverse separation: the kernel's x1-marginal vanishes off the
  // axis, so axially long bumps see the cancellation and decay faster than
  // the R^-3 law this experiment is after.
  double x1_extent = 0.75;
  GridSpec grid;

  void validate() const {
    if (op != "E1" && op != "E1sq")
      throw config_error("decay: operator must be E1 or E1sq");
    if (!(gamma1 > 0.0))
      throw config_error("decay: gamma1 must be positive");
    if (!(gamma2 > gamma1))
      throw config_error("decay: supports overlap, need gamma2 > gamma1");
    if (!(ring_width > 0.0) || !(x1_extent > 0.0))
      throw config_error("decay: bump shape parameters must be positive");
    if (R_values.size() < 4)
      throw config_error("decay: need at least 4 separations for a fit");
    for (std::size_t i = 0; i < R_values.size(); ++i) {
      if (!(R_values[i] > 0.0))
        throw config_error("decay: separations must be positive");
      if (i > 0 && !(R_values[i] > R_values[i - 1]))
        throw config_error("decay: separations must increase");
    }
    grid.validate();
    double hbar = std::max(grid.spacing(1), grid.spacing(2));
    double Rmax = R_values.back(), Rmin = R_values.front();
    // the gap between supports must be resolved, else they touch on the grid
    if ((gamma2 - gamma1) * Rmin < 2.0 * hbar)
      throw config_error("decay: supports overlap on the grid");
    double outer = (gamma2 + ring_width) * Rmax;
    double half = 0.5 * std::min(grid.L2, grid.L3);
    if (outer > half - 2.0 * hbar)
      throw config_error("decay: largest separation does not fit the box");
    if (x1_extent > 0.5 * grid.L1 - 2.0 * grid.spacing(0))
      throw config_error("decay: axial extent does not fit the box");
  }
};

// L1-normalized bump in the inner cylinder {|xbar| <= gamma1 R, |x1| < aR}.
// The transverse factor is a function of |xbar|^2, smooth through the axis.
inline ComplexField decay_inner_bump(const GridSpec& g, double R,
                                     double gamma1, double ax) {
  double rad2 = sq(gamma1 * R);
  ComplexField f = ComplexField::sample(g, [&](double x1, double x2, double x3) {
    return detail::bump_unit(x1 / ax) *
           detail::bump_unit((sq(x2) + sq(x3)) / rad2);
  });
  CompensatedSum s;
  for (const cplx& z : f.v) s.add(std::abs(z));
  double l1 = s.value() * g.cell_volume();
  if (!(l1 > 0.0)) throw numeric_error("decay: inner bump vanished on the grid");
  for (cplx& z : f.v) z /= l1;
  return f;
}

// L1-normalized annular bump in {gamma2 R <= |xbar| <= (gamma2 + w) R}. The
// |xbar| kink at the axis is outside the support, so the field is smooth.
inline ComplexField decay_outer_ring(const GridSpec& g, double R,
                                     double gamma2, double w, double ax) {
  double rc = (gamma2 + 0.5 * w) * R, hw = 0.5 * w * R;
  ComplexField f = ComplexField::sample(g, [&](double x1, double x2, double x3) {
    double r = std::sqrt(sq(x2) + sq(x3));
    return detail::bump_unit(x1 / ax) * detail::bump_unit((r - rc) / hw);
  });
  CompensatedSum s;
  for (const cplx& z : f.v) s.add(std::abs(z));
  double l1 = s.value() * g.cell_volume();
  if (!(l1 > 0.0)) throw numeric_error("decay: outer ring vanished on the grid");
  for (cplx& z : f.v) z /= l1;
  return f;
}

inline double decay_pairing(const ComplexField& f, const ComplexField& gfield,
                            const std::string& op) {
  ComplexField ef = op == "E1sq" ? e1sq_apply(f) : e1_apply(f);
  return pairing(ef, gfield);
}

struct DecayPoint {
  double R = 0.0;
  double value = 0.0;   // |<E1^k f_R, g_R>|, both factors L1-normalized
  bool excluded = false;  // below the noise floor, dropped from the fit
};

struct DecayFit {
  std::string op;
  std::vector<DecayPoint> points;
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double slope_ci = std::numeric_limits<double>::quiet_NaN();  // 95% half-width
  int n_used = 0;
};

inline void fit_loglog(DecayFit& fit) {
  std::vector<double> xs, ys;
  for (const DecayPoint& p : fit.points)
    if (!p.excluded) {
      xs.push_back(std::log(p.R));
      ys.push_back(std::log(p.value));
    }
  int n = int(xs.size());
  fit.n_used = n;
  if (n < 4)
    throw numeric_error("decay: fewer than 4 pairings above the noise floor");
  double xm = 0.0, ym = 0.0;
  for (int i = 0; i < n; ++i) {
    xm += xs[i];
    ym += ys[i];
  }
  xm /= n;
  ym /= n;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += sq(xs[i] - xm);
    sxy += (xs[i] - xm) * (ys[i] - ym);
  }
  fit.slope = sxy / sxx;
  fit.intercept = ym - fit.slope * xm;
  double rss = 0.0;
  for (int i = 0; i < n; ++i)
    rss += sq(ys[i] - fit.intercept - fit.slope * xs[i]);
  double se = std::sqrt(rss / double(n - 2) / sxx);
  fit.slope_ci = detail::t95(n - 2) * se;
}

inline DecayFit pairing_decay_experiment(const DecayExperimentSpec& spec) {
  spec.validate();
  DecayFit fit;
  fit.op = spec.op;
  double floor = 1e3 * DBL_EPSILON;
  for (double R : spec.R_values) {
    ComplexField gin = decay_inner_bump(spec.grid, R, spec.gamma1,
                                        spec.x1_extent);
    ComplexField fout = decay_outer_ring(spec.grid, R, spec.gamma2,
                                         spec.ring_width, spec.x1_extent);
    DecayPoint pt;
    pt.R = R;
    pt.value = std::abs(decay_pairing(fout, gin, spec.op));
    pt.excluded = pt.value < floor;
    fit.points.push_back(pt);
  }
  fit_loglog(fit);
  return fit;
}

// ----------------------------------------------------------- trace embedding

struct StraussOptions {
  int modes = 6;         // Bessel rings per sample
  double k1_max = 4.0;   // axial carrier window
  double q_min = 0.8;    // transverse ring frequency window
  double q_max = 5.0;
  double ax_width = 3.0; // axial Gaussian envelope

  void validate(const GridSpec& g) const {
    if (modes < 1) throw config_error("strauss: need at least one mode");
    if (!(q_max > q_min && q_min > 0.0))
      throw config_error("strauss: need 0 < q_min < q_max");
    if (!(ax_width > 0.0))
      throw config_error("strauss: axial width must be positive");
    double nyq = std::min(pi / g.spacing(1), pi / g.spacing(2));
    if (q_max > 0.8 * nyq || k1_max + 3.0 / ax_width > pi / g.spacing(0))
      throw config_error("strauss: spectral band exceeds the grid Nyquist");
  }
};

// Random cylindrical field: random Bessel rings J0(q |xbar|) under random
// axial carriers. Exactly cylindrical in the continuum, band-limited at
// |xibar| = q, and built from continuum parameters only, so coarse and fine
// grids sample the same field. The J0 tails carry the 1/sqrt(rho) azimuthal
// spreading envelope, which is what populates L4 mass beyond the cutoff.
inline ComplexField strauss_sample(const GridSpec& g, CounterRng& rng,
                                   const StraussOptions& opt) {
  struct Mode {
    double p, q;
    cplx z;
  };
  std::vector<Mode> modes(opt.modes);
  for (Mode& m : modes) {
    m.p = rng.uniform(-opt.k1_max, opt.k1_max);
    m.q = rng.uniform(opt.q_min, opt.q_max);
    m.z = cplx(rng.normal(), rng.normal());
  }
  int nt = g.n2 * g.n3;
  std::vector<double> rho(nt);
  for (int i2 = 0, t = 0; i2 < g.n2; ++i2) {
    double x2 = g.coord(1, i2);
    for (int i3 = 0; i3 < g.n3; ++i3, ++t)
      rho[t] = std::sqrt(sq(x2) + sq(g.coord(2, i3)));
  }
  ComplexField u(g);
  std::vector<double> bes(nt);
  double iw2 = 1.0 / (2.0 * sq(opt.ax_width));
  for (const Mode& m : modes) {
    for (int t = 0; t < nt; ++t) bes[t] = std::cyl_bessel_j(0.0, m.q * rho[t]);
    for (int i1 = 0; i1 < g.n1; ++i1) {
      double x1 = g.coord(0, i1);
      cplx ax = m.z * std::polar(1.0, m.p * x1) * std::exp(-sq(x1) * iw2);
      cplx* row = &u.v[std::size_t(i1) * nt];
      for (int t = 0; t < nt; ++t) row[t] += ax * bes[t];
    }
  }
  return u;
}

struct StraussReport {
  double R = 0.0;
  int samples = 0;
  double max_ratio = 0.0;   // empirical embedding constant at mass 1
  double mean_ratio = 0.0;
  std::vector<double> ratios;
};

// ratio_i = ||f||_L4(|xbar|>=R)^4 * R / ||f||_{H1dot}^2 at M(f) = 1
inline StraussReport strauss_check(int samples, double R, const GridSpec& g,
                                   CounterRng rng,
                                   const StraussOptions& opt = {}) {
  if (samples < 1) throw config_error("strauss: need at least one sample");
  // the outside region is nonempty until R reaches the transverse box corner
  if (!(R > 0.0) || R >= 0.7 * std::min(g.L2, g.L3))
    throw config_error("strauss: cutoff radius must sit inside the box");
  opt.validate(g);
  StraussReport rep;
  rep.R = R;
  rep.samples = samples;
  rep.ratios.reserve(samples);
  CompensatedSum mean;
  for (int s = 0; s < samples; ++s) {
    CounterRng sub = rng.substream(std::uint64_t(s));
    ComplexField u = strauss_sample(g, sub, opt);
    double m = l2_norm_sq(u);
    if (!(m > 0.0)) throw numeric_error("strauss: degenerate sample");
    double scale = 1.0 / std::sqrt(m);
    for (cplx& z : u.v) z *= scale;
    double tail = lp_norm(u, 4.0, Region::cylinder_outside, R);
    double ratio = sq(sq(tail)) * R / h1dot_sq(u);
    rep.ratios.push_back(ratio);
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    mean.add(ratio);
  }
  rep.mean_ratio = mean.value() / samples;
  return rep;
}

// ------------------------------------------------------------ operator norm

struct L2BoundReport {
  double max_ratio = 0.0;  // sup ||E1^k f||_2 / ||f||_2 over the ensemble
  int samples = 0;
};

// White-noise ensemble through the x-space operator path; the symbol lies in
// [0, 1], so any ratio above 1 + roundoff is an implementation fault.
inline L2BoundReport l2_boundedness_probe(const std::string& op, int samples,
                                          const GridSpec& g, CounterRng rng) {
  if (op != "E1" && op != "E1sq")
    throw config_error("l2 probe: operator must be E1 or E1sq");
  if (samples < 1) throw config_error("l2 probe: need at least one sample");
  L2BoundReport rep;
  rep.samples = samples;
  for (int s = 0; s < samples; ++s) {
    CounterRng sub = rng.substream(std::uint64_t(s));
    ComplexField f(g);
    for (cplx& z : f.v) z = cplx(sub.normal(), sub.normal());
    ComplexField ef = op == "E1sq" ? e1sq_apply(f) : e1_apply(f);
    rep.max_ratio = std::max(rep.max_ratio, l2_norm(ef) / l2_norm(f));
  }
  return rep;
}

// Gaussian spectral packet at a chosen center; tight transverse width against
// a large axial carrier puts the symbol near 1, a xi1 = 0 slab puts it at 0.
inline ComplexField spectral_packet(const GridSpec& g, double center_k1,
                                    double axial_width, double transverse_width) {
  ComplexField uhat(g);
  std::size_t idx = 0;
  for (int k1 = 0; k1 < g.n1; ++k1) {
    double xi1 = g.freq(0, k1);
    for (int k2 = 0; k2 < g.n2; ++k2) {
      double xi2 = g.freq(1, k2);
      for (int k3 = 0; k3 < g.n3; ++k3, ++idx) {
        double xibar2 = sq(xi2) + sq(g.freq(2, k3));
        double arg = sq(xi1 - center_k1) / (2.0 * sq(axial_width)) +
                     xibar2 / (2.0 * sq(transverse_width));
        uhat.v[idx] = arg < 40.0 ? std::exp(-arg) : 0.0;
      }
    }
  }
  fft::inverse_inplace(g, uhat.v.data());
  return uhat;
}

inline double l2_ratio(const std::string& op, const ComplexField& f) {
  ComplexField ef = op == "E1sq" ? e1sq_apply(f) : e1_apply(f);
  return l2_norm(ef) / l2_norm(f);
}

}  // namespace ds3
