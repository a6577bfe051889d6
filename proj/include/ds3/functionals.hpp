#pragma once

#include <string>

#include "ds3/spectral.hpp"

namespace ds3 {

// Model coefficients for
//   i u_t + Lap u + c1 |u|^alpha u + c2 E1(|u|^2) u = 0
// with E1 the sigma1 multiplier. Both couplings focusing; zero switches a
// term off (free evolution when both vanish).
struct SimParams {
  double c1 = 1.0;
  double c2 = 1.0;
  double alpha = 2.0;

  void validate() const {
    if (!(c1 >= 0.0)) throw config_error("model: c1 must be nonnegative");
    if (!(c2 >= 0.0)) throw config_error("model: c2 must be nonnegative");
    if (!(alpha > 0.0 && alpha < 4.0))
      throw config_error("model: alpha must lie in (0, 4)");
  }
  // window in which the blow-up criterion applies
  bool alpha_in_criterion_window() const {
    return alpha >= 4.0 / 3.0 - 1e-12 && alpha <= 2.0 + 1e-12;
  }
};

// |u|^2 as a real field
inline RealField density(const ComplexField& u) {
  RealField m(u.grid);
  for (std::size_t i = 0; i < u.v.size(); ++i) m.v[i] = std::norm(u.v[i]);
  return m;
}

// (|u|^2)^(alpha/2) pointwise; alpha = 2 short-circuits to the density
inline RealField amplitude_power(const RealField& m, double alpha) {
  RealField out(m.grid);
  if (alpha == 2.0) {
    out.v = m.v;
    return out;
  }
  double e = 0.5 * alpha;
  for (std::size_t i = 0; i < m.v.size(); ++i) out.v[i] = std::pow(m.v[i], e);
  return out;
}

// E1(|u|^2) as a real field (the symbol is real and even, so the output of
// the round trip is real up to roundoff; the real part is taken)
inline RealField nonlocal_density(const ComplexField& u) {
  ComplexField m(u.grid);
  for (std::size_t i = 0; i < u.v.size(); ++i)
    m.v[i] = cplx(std::norm(u.v[i]), 0.0);
  fft::forward_inplace(m.grid, m.v.data());
  const GridSpec& g = m.grid;
  std::size_t p = 0;
  for (int k1 = 0; k1 < g.n1; ++k1) {
    double xi1 = g.freq(0, k1);
    for (int k2 = 0; k2 < g.n2; ++k2) {
      double xi2 = g.freq(1, k2);
      for (int k3 = 0; k3 < g.n3; ++k3, ++p)
        m.v[p] *= sigma1_eval(xi1, xi2, g.freq(2, k3));
    }
  }
  fft::inverse_inplace(g, m.v.data());
  RealField out(g);
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = m.v[i].real();
  return out;
}

// local + nonlocal potential W = c1 |u|^alpha + c2 E1(|u|^2), real
inline RealField nonlinear_potential(const ComplexField& u,
                                     const SimParams& p) {
  RealField m = density(u);
  RealField w = nonlocal_density(u);
  RealField pw = amplitude_power(m, p.alpha);
  for (std::size_t i = 0; i < w.v.size(); ++i)
    w.v[i] = p.c1 * pw.v[i] + p.c2 * w.v[i];
  return w;
}

// N(u) = W u, the full nonlinearity
inline ComplexField nonlinear_term(const ComplexField& u, const SimParams& p) {
  RealField w = nonlinear_potential(u, p);
  ComplexField out(u.grid);
  for (std::size_t i = 0; i < u.v.size(); ++i) out.v[i] = w.v[i] * u.v[i];
  return out;
}

// The four primitive integrals every conserved quantity is affine in:
//   M   = int |u|^2
//   K   = int |grad u|^2           (spectral, Nyquist included)
//   Pow = int |u|^(alpha+2)
//   NL  = < E1(|u|^2), |u|^2 >     (nonnegative: the symbol is in [0,1])
struct Primitives {
  double M = 0, K = 0, Pow = 0, NL = 0;
};

inline double mass(const ComplexField& u) { return l2_norm_sq(u); }

inline double h1dot_sq(const ComplexField& u) {
  ComplexField hat = fft::forward(u);
  const GridSpec& g = u.grid;
  CompensatedSum s;
  std::size_t p = 0;
  for (int k1 = 0; k1 < g.n1; ++k1) {
    double a = sq(g.freq(0, k1));
    for (int k2 = 0; k2 < g.n2; ++k2) {
      double b = sq(g.freq(1, k2));
      for (int k3 = 0; k3 < g.n3; ++k3, ++p)
        s.add((a + b + sq(g.freq(2, k3))) * std::norm(hat.v[p]));
    }
  }
  return s.value() * g.cell_volume() / double(g.size());
}

inline double power_integral(const ComplexField& u, double alpha) {
  CompensatedSum s;
  double e = 0.5 * (alpha + 2.0);
  for (const cplx& z : u.v) s.add(std::pow(std::norm(z), e));
  return s.value() * u.grid.cell_volume();
}

inline double nonlocal_form(const ComplexField& u) {
  ComplexField m(u.grid);
  for (std::size_t i = 0; i < u.v.size(); ++i)
    m.v[i] = cplx(std::norm(u.v[i]), 0.0);
  fft::forward_inplace(m.grid, m.v.data());
  const GridSpec& g = m.grid;
  CompensatedSum s;
  std::size_t p = 0;
  for (int k1 = 0; k1 < g.n1; ++k1) {
    double xi1 = g.freq(0, k1);
    for (int k2 = 0; k2 < g.n2; ++k2) {
      double xi2 = g.freq(1, k2);
      for (int k3 = 0; k3 < g.n3; ++k3, ++p)
        s.add(sigma1_eval(xi1, xi2, g.freq(2, k3)) * std::norm(m.v[p]));
    }
  }
  return s.value() * g.cell_volume() / double(g.size());
}

inline Primitives primitives(const ComplexField& u, const SimParams& p) {
  Primitives pr;
  pr.M = mass(u);
  pr.K = h1dot_sq(u);
  pr.Pow = power_integral(u, p.alpha);
  pr.NL = nonlocal_form(u);
  return pr;
}

inline double energy_of(const Primitives& pr, const SimParams& p) {
  return 0.5 * pr.K - p.c1 / (p.alpha + 2.0) * pr.Pow - 0.25 * p.c2 * pr.NL;
}

inline double pohozaev_of(const Primitives& pr, const SimParams& p) {
  return pr.K - 1.5 * p.c1 * p.alpha / (p.alpha + 2.0) * pr.Pow -
         0.75 * p.c2 * pr.NL;
}

inline double action_of(const Primitives& pr, const SimParams& p) {
  return energy_of(pr, p) + 0.5 * pr.M;
}

inline double energy(const ComplexField& u, const SimParams& p) {
  return energy_of(primitives(u, p), p);
}

inline double pohozaev(const ComplexField& u, const SimParams& p) {
  return pohozaev_of(primitives(u, p), p);
}

// action S = E + M/2; its value at the ground state is the criterion
// threshold
inline double action(const ComplexField& u, const SimParams& p) {
  return action_of(primitives(u, p), p);
}

struct FunctionalReport {
  double mass = 0, h1dot = 0, energy = 0, lagrangian = 0, pohozaev = 0;
  Primitives prim;
};

inline FunctionalReport functional_report(const ComplexField& u,
                                          const SimParams& p) {
  FunctionalReport r;
  r.prim = primitives(u, p);
  r.mass = r.prim.M;
  r.h1dot = std::sqrt(r.prim.K);
  r.energy = energy_of(r.prim, p);
  r.pohozaev = pohozaev_of(r.prim, p);
  r.lagrangian = r.energy + 0.5 * r.prim.M;
  return r;
}

// Restriction masks are sharp indicator functions of the transverse radius:
// inside means |xbar| <= R, outside means |xbar| > R.
enum class Region { all, cylinder_inside, cylinder_outside };

inline Region parse_region(const std::string& tag, double* R_out) {
  if (tag == "all") {
    if (R_out) *R_out = 0.0;
    return Region::all;
  }
  for (auto [name, reg] :
       {std::pair<const char*, Region>{"cylinder_inside", Region::cylinder_inside},
        std::pair<const char*, Region>{"cylinder_outside", Region::cylinder_outside}}) {
    std::string prefix = std::string(name) + "(";
    if (tag.rfind(prefix, 0) == 0 && tag.back() == ')') {
      std::string num = tag.substr(prefix.size(), tag.size() - prefix.size() - 1);
      try {
        double R = std::stod(num);
        if (!(R > 0.0)) throw usage_error("region: radius must be positive");
        if (R_out) *R_out = R;
        return reg;
      } catch (const std::invalid_argument&) {
        throw usage_error("region: bad radius in '" + tag + "'");
      }
    }
  }
  throw usage_error("region: unknown tag '" + tag + "'");
}

inline double lp_norm(const ComplexField& u, double p, Region region,
                      double R = 0.0) {
  if (!(p >= 1.0)) throw usage_error("lp_norm: p must be >= 1");
  if (region != Region::all && !(R > 0.0))
    throw usage_error("lp_norm: restricted region needs a positive radius");
  const GridSpec& g = u.grid;
  double R2 = R * R;
  CompensatedSum s;
  double e = 0.5 * p;
  std::size_t idx = 0;
  for (int i1 = 0; i1 < g.n1; ++i1) {
    for (int i2 = 0; i2 < g.n2; ++i2) {
      double x2 = g.coord(1, i2);
      for (int i3 = 0; i3 < g.n3; ++i3, ++idx) {
        if (region != Region::all) {
          double r2 = sq(x2) + sq(g.coord(2, i3));
          bool inside = r2 <= R2;
          if (region == Region::cylinder_inside ? !inside : inside) continue;
        }
        s.add(std::pow(std::norm(u.v[idx]), e));
      }
    }
  }
  return std::pow(s.value() * g.cell_volume(), 1.0 / p);
}

}  // namespace ds3
