#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ds3/functionals.hpp"

namespace ds3 {

// Solvers for the standing-wave profile equation
//   -Lap Q + Q = N(Q),   N(Q) = c1 |Q|^alpha Q + c2 E1(|Q|^2) Q
// on the periodic box. Two independent routes are provided so each can
// vouch for the other: a stabilized fixed-point iteration and a damped
// preconditioned descent with an amplitude projection.

struct GroundStateOptions {
  double tol = 1e-8;        // on ||(-Lap+1)Q - N(Q)|| / ||Q||
  int max_iter = 800;
  double theta = 1.5;       // stabilizer exponent
  double gamma_min = 0.05;  // trust range for the stabilizer ratio
  double gamma_max = 20.0;
  double descent_step = 0.6;  // damping for the descent route
  int stall_window = 12;      // consecutive residual increases tolerated
};

struct GroundStateResult {
  ComplexField Q;
  bool converged = false;
  int iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
  double last_gamma = 0.0;  // stabilizer ratio at the final iterate
  std::vector<double> residual_history;
  std::string method;
  std::string diagnostic;  // set when not converged
  SimParams params;
};

namespace detail {

inline std::vector<double> one_plus_k2(const GridSpec& g) {
  std::vector<double> w(g.size());
  std::size_t p = 0;
  for (int k1 = 0; k1 < g.n1; ++k1) {
    double a = sq(g.freq(0, k1));
    for (int k2 = 0; k2 < g.n2; ++k2) {
      double b = a + sq(g.freq(1, k2));
      for (int k3 = 0; k3 < g.n3; ++k3, ++p) w[p] = 1.0 + b + sq(g.freq(2, k3));
    }
  }
  return w;
}

// residual ||(1 - Lap) Q - N(Q)||_2 / ||Q||_2, all in spectral space;
// normalization factors cancel in the ratio
inline double residual_rel(const std::vector<double>& w, const ComplexField& Qhat,
                           const ComplexField& Nhat) {
  CompensatedSum num, den;
  for (std::size_t i = 0; i < Qhat.v.size(); ++i) {
    num.add(std::norm(w[i] * Qhat.v[i] - Nhat.v[i]));
    den.add(std::norm(Qhat.v[i]));
  }
  if (den.value() == 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(num.value() / den.value());
}

inline ComplexField default_seed(const GridSpec& g) {
  return ComplexField::sample(g, [](double a, double b, double c) {
    return std::exp(-(a * a + b * b + c * c) / 2.0);
  });
}

inline void sign_normalize(ComplexField& Q) {
  double best = 0.0;
  double sign = 1.0;
  for (const cplx& z : Q.v)
    if (std::abs(z.real()) > best) {
      best = std::abs(z.real());
      sign = z.real() >= 0.0 ? 1.0 : -1.0;
    }
  if (sign < 0.0)
    for (cplx& z : Q.v) z = -z;
}

inline ComplexField prepare_seed(const GridSpec& g,
                                 const std::optional<ComplexField>& seed) {
  if (!seed) return default_seed(g);
  check_same_grid(seed->grid, g, "ground_state seed");
  if (l2_norm_sq(*seed) == 0.0)
    throw usage_error("ground_state: seed must be nonzero");
  return *seed;
}

// unique positive root of c1 lam^alpha Pow + c2 lam^2 NL = K + M; used to
// project the descent iterate back onto the constraint <S'(Q), Q> = 0,
// which removes the unstable pure-amplitude direction of the fixed point
inline double nehari_scale(double target, double aPow, double bNL,
                           double alpha) {
  if (!(target > 0.0) || aPow + bNL <= 0.0)
    throw numeric_error("ground_state: degenerate amplitude projection");
  double lam = 1.0;
  for (int it = 0; it < 200; ++it) {
    double f = aPow * std::pow(lam, alpha) + bNL * lam * lam - target;
    double df = alpha * aPow * std::pow(lam, alpha - 1.0) + 2.0 * bNL * lam;
    double step = f / df;
    double next = lam - step;
    if (!(next > 0.0)) next = 0.5 * lam;
    if (std::abs(next - lam) <= 1e-14 * lam) return next;
    lam = next;
  }
  return lam;
}

}  // namespace detail

inline GroundStateResult petviashvili_solve(
    const SimParams& p, const GridSpec& g,
    const GroundStateOptions& opts = {},
    const std::optional<ComplexField>& seed = std::nullopt) {
  p.validate();
  if (p.c1 == 0.0 && p.c2 == 0.0)
    throw config_error("ground state: needs a focusing nonlinearity");
  GroundStateResult res;
  res.method = "petviashvili";
  res.params = p;
  res.Q = detail::prepare_seed(g, seed);

  std::vector<double> w = detail::one_plus_k2(g);
  ComplexField Qhat = fft::forward(res.Q);

  int grow_streak = 0;
  double prev_res = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    ComplexField N = nonlinear_term(res.Q, p);
    ComplexField Nhat = fft::forward(N);

    CompensatedSum num, den;
    for (std::size_t i = 0; i < Qhat.v.size(); ++i) {
      num.add(w[i] * std::norm(Qhat.v[i]));
      den.add(Nhat.v[i].real() * Qhat.v[i].real() +
              Nhat.v[i].imag() * Qhat.v[i].imag());
    }
    res.residual = detail::residual_rel(w, Qhat, Nhat);
    res.residual_history.push_back(res.residual);
    res.iterations = iter;
    if (den.value() > 0.0) res.last_gamma = num.value() / den.value();

    if (res.residual <= opts.tol) {
      res.converged = true;
      break;
    }
    if (iter == opts.max_iter) {
      res.diagnostic = "max iterations reached";
      break;
    }
    if (den.value() <= 0.0)
      throw numeric_error("petviashvili: stabilizer undefined, <N(Q),Q> <= 0");
    double gamma = res.last_gamma;
    if (gamma < opts.gamma_min || gamma > opts.gamma_max) {
      res.diagnostic = "stabilizer ratio left trust range";
      break;
    }
    grow_streak = res.residual > prev_res * (1.0 + 1e-12) ? grow_streak + 1 : 0;
    if (grow_streak >= opts.stall_window) {
      res.diagnostic = "residual diverging";
      break;
    }
    prev_res = res.residual;

    double boost = std::pow(gamma, opts.theta);
    for (std::size_t i = 0; i < Qhat.v.size(); ++i)
      Qhat.v[i] = boost * Nhat.v[i] / w[i];
    res.Q = fft::inverse(Qhat);
  }

  detail::sign_normalize(res.Q);
  return res;
}

inline GroundStateResult gradient_flow_solve(
    const SimParams& p, const GridSpec& g,
    const GroundStateOptions& opts = {},
    const std::optional<ComplexField>& seed = std::nullopt) {
  p.validate();
  if (p.c1 == 0.0 && p.c2 == 0.0)
    throw config_error("ground state: needs a focusing nonlinearity");
  GroundStateResult res;
  res.method = "gradient_flow";
  res.params = p;
  res.Q = detail::prepare_seed(g, seed);

  std::vector<double> w = detail::one_plus_k2(g);
  ComplexField Qhat = fft::forward(res.Q);
  double tau = opts.descent_step;
  double invN = 1.0 / double(g.size());
  double h3 = g.cell_volume();

  int grow_streak = 0;
  double prev_res = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    ComplexField N = nonlinear_term(res.Q, p);
    ComplexField Nhat = fft::forward(N);

    res.residual = detail::residual_rel(w, Qhat, Nhat);
    res.residual_history.push_back(res.residual);
    res.iterations = iter;
    if (res.residual <= opts.tol) {
      res.converged = true;
      break;
    }
    if (iter == opts.max_iter) {
      res.diagnostic = "max iterations reached";
      break;
    }
    grow_streak = res.residual > prev_res * (1.0 + 1e-12) ? grow_streak + 1 : 0;
    if (grow_streak >= opts.stall_window) {
      res.diagnostic = "residual diverging";
      break;
    }
    prev_res = res.residual;

    // preconditioned residual step in spectral space
    for (std::size_t i = 0; i < Qhat.v.size(); ++i)
      Qhat.v[i] = (1.0 - tau) * Qhat.v[i] + tau * Nhat.v[i] / w[i];
    res.Q = fft::inverse(Qhat);

    // amplitude projection: rescale so <S'(Q), Q> = 0
    CompensatedSum km;
    for (std::size_t i = 0; i < Qhat.v.size(); ++i)
      km.add(w[i] * std::norm(Qhat.v[i]));
    double KM = km.value() * h3 * invN;
    double Pow = power_integral(res.Q, p.alpha);
    double NL = nonlocal_form(res.Q);
    double lam =
        detail::nehari_scale(KM, p.c1 * Pow, p.c2 * NL, p.alpha);
    for (std::size_t i = 0; i < Qhat.v.size(); ++i) Qhat.v[i] *= lam;
    for (std::size_t i = 0; i < res.Q.v.size(); ++i) res.Q.v[i] *= lam;
  }

  detail::sign_normalize(res.Q);
  return res;
}

// Independent post-hoc checks on a converged profile. The residual is
// recomputed through the physical-space operator route rather than the
// solver's internal spectral bookkeeping.
struct CertifyOptions {
  double residual_tol = 1e-8;
  double pairing_tol = 1e-6;     // relative <S'(Q),Q> defect
  double pohozaev_tol = 1e-6;    // |P(Q)| / ||grad Q||^2
  double symmetry_tol = 1e-8;    // cylindrical deviation
  double reality_tol = 1e-10;    // imag part / negative part vs sup norm
};

struct Certification {
  bool passed = false;
  double residual = 0.0;
  double pairing_rel = 0.0;
  double pohozaev_rel = 0.0;
  double cylindrical_dev = 0.0;
  double reality_dev = 0.0;
  double action_S = 0.0;
  double mass = 0.0;
  double kinetic = 0.0;
  std::vector<std::string> failures;
};

inline Certification certify(const GroundStateResult& gs, const SimParams& p,
                             const CertifyOptions& opts = {}) {
  if (!gs.converged)
    throw usage_error("certify: profile did not converge");
  Certification c;
  const ComplexField& Q = gs.Q;

  ComplexField lap = laplacian(Q);
  ComplexField N = nonlinear_term(Q, p);
  ComplexField resfield(Q.grid);
  for (std::size_t i = 0; i < Q.v.size(); ++i)
    resfield.v[i] = -lap.v[i] + Q.v[i] - N.v[i];
  c.residual = l2_norm(resfield) / l2_norm(Q);

  Primitives pr = primitives(Q, p);
  c.mass = pr.M;
  c.kinetic = pr.K;
  c.action_S = action_of(pr, p);
  double lhs = pr.K + pr.M;
  c.pairing_rel = std::abs(lhs - p.c1 * pr.Pow - p.c2 * pr.NL) / lhs;
  c.pohozaev_rel = std::abs(pohozaev_of(pr, p)) / pr.K;

  c.cylindrical_dev = is_cylindrical(Q, opts.symmetry_tol).deviation;

  double sup = sup_norm(Q);
  double dev = 0.0;
  for (const cplx& z : Q.v) {
    dev = std::max(dev, std::abs(z.imag()));
    dev = std::max(dev, std::max(0.0, -z.real()));
  }
  c.reality_dev = sup > 0.0 ? dev / sup : 0.0;

  auto flag = [&](bool bad, const char* what) {
    if (bad) c.failures.push_back(what);
  };
  flag(c.residual > opts.residual_tol, "residual");
  flag(c.pairing_rel > opts.pairing_tol, "pairing");
  flag(c.pohozaev_rel > opts.pohozaev_tol, "pohozaev");
  flag(c.cylindrical_dev > opts.symmetry_tol, "symmetry");
  flag(c.reality_dev > opts.reality_tol, "reality");
  flag(!(c.action_S > 0.0), "action sign");
  c.passed = c.failures.empty();
  return c;
}

}  // namespace ds3
