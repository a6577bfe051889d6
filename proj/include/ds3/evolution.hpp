#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ds3/virial.hpp"

namespace ds3 {

struct EvolveConfig {
  double dt0 = 1e-3;
  double t_max = 1.0;
  double dt_min = 1e-6;
  double grad_blowup_factor = 10.0;
  // Safety factor on the nominal step. 0.7 keeps the split-step phase error
  // of a dt0=1e-3 desk run comfortably inside a 1e-6 energy budget; 0.9
  // leaves no margin on sharp transients.
  double cfl_safety = 0.7;
  int record_every = 10;
  double mass_drift_tol = 1e-8;
  double energy_drift_tol = 1e-5;

  void validate() const {
    if (!(dt_min > 0.0 && dt0 > dt_min))
      throw config_error("evolve: need dt0 > dt_min > 0");
    if (!(t_max > 0.0)) throw config_error("evolve: t_max must be positive");
    if (!(grad_blowup_factor > 1.0))
      throw config_error("evolve: grad_blowup_factor must exceed 1");
    if (!(cfl_safety > 0.0 && cfl_safety <= 1.0))
      throw config_error("evolve: cfl_safety must lie in (0, 1]");
    if (record_every < 1)
      throw config_error("evolve: record_every must be at least 1");
    if (!(mass_drift_tol > 0.0) || !(energy_drift_tol > 0.0))
      throw config_error("evolve: drift tolerances must be positive");
  }
};

// One sampled instant of the run. Virial columns are NaN when no
// localization profile was supplied; the FD column is filled in a post-pass
// over interior record times.
struct DiagnosticsRow {
  double t = 0.0;
  double dt = 0.0;
  double mass = 0.0;
  double energy = 0.0;
  double lagrangian = 0.0;
  double pohozaev = 0.0;
  double h1dot = 0.0;
  double l4_outer = std::numeric_limits<double>::quiet_NaN();
  double virial_V = std::numeric_limits<double>::quiet_NaN();
  double virial_dVdt_analytic = std::numeric_limits<double>::quiet_NaN();
  double virial_dVdt_fd = std::numeric_limits<double>::quiet_NaN();
  double d2V_rhs = std::numeric_limits<double>::quiet_NaN();
};

inline constexpr const char* diagnostics_csv_header =
    "t,dt,mass,energy,lagrangian,pohozaev,h1dot,l4_outer,virial_V,"
    "virial_dVdt_analytic,virial_dVdt_fd,d2V_rhs";

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<DiagnosticsRow> rows;
  std::string verdict = "completed";  // completed | blowup_detected | aborted
  std::optional<double> blowup_time_estimate;
  std::string abort_reason;
  ComplexField final_state;
  std::size_t steps = 0;
};

namespace detail {

inline std::vector<double> k2_table(const GridSpec& g) {
  std::vector<double> k2(g.size());
  std::size_t q = 0;
  for (int k1 = 0; k1 < g.n1; ++k1) {
    double a = sq(g.freq(0, k1));
    for (int k2i = 0; k2i < g.n2; ++k2i) {
      double b = a + sq(g.freq(1, k2i));
      for (int k3 = 0; k3 < g.n3; ++k3, ++q) k2[q] = b + sq(g.freq(2, k3));
    }
  }
  return k2;
}

// spectral mass and squared gradient norm straight off an unnormalized
// transform (Parseval: one physical-space pass saved per step)
inline void spectral_moments(const GridSpec& g, const std::vector<cplx>& uhat,
                             const std::vector<double>& k2, double& mass_out,
                             double& h1sq_out) {
  CompensatedSum m, k;
  for (std::size_t i = 0; i < uhat.size(); ++i) {
    double a = std::norm(uhat[i]);
    m.add(a);
    k.add(k2[i] * a);
  }
  double w = g.cell_volume() / double(g.size());
  mass_out = m.value() * w;
  h1sq_out = k.value() * w;
}

// pointwise nonlinear potential c1 |u|^alpha + c2 E1(|u|^2), one transform
// pair for the nonlocal part
inline std::vector<double> nonlinear_phase_potential(const ComplexField& u,
                                                     const SimParams& p) {
  const GridSpec& g = u.grid;
  std::vector<double> w(g.size(), 0.0);
  ComplexField mhat(g);
  for (std::size_t i = 0; i < u.v.size(); ++i)
    mhat.v[i] = cplx(std::norm(u.v[i]), 0.0);
  if (p.c2 != 0.0) {
    ComplexField e1 = mhat;
    fft::forward_inplace(g, e1.v.data());
    auto sig = e1_multiplier(g);
    for (std::size_t i = 0; i < e1.v.size(); ++i) e1.v[i] *= sig.symbol[i];
    fft::inverse_inplace(g, e1.v.data());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = p.c2 * e1.v[i].real();
  }
  if (p.c1 != 0.0) {
    if (p.alpha == 2.0) {
      for (std::size_t i = 0; i < w.size(); ++i)
        w[i] += p.c1 * mhat.v[i].real();
    } else {
      double e = 0.5 * p.alpha;
      for (std::size_t i = 0; i < w.size(); ++i)
        w[i] += p.c1 * std::pow(mhat.v[i].real(), e);
    }
  }
  return w;
}

}  // namespace detail

// Symmetric splitting: half of the free flow, the full nonlinear phase
// rotation (exact, since the potential is real), half of the free flow.
// Pointwise unitary in both substeps, so mass is conserved to roundoff.
inline ComplexField strang_step(const ComplexField& u, double dt,
                                const SimParams& p) {
  if (!(dt > 0.0)) throw usage_error("strang_step: dt must be positive");
  p.validate();
  const GridSpec& g = u.grid;
  auto k2 = detail::k2_table(g);

  ComplexField work = fft::forward(u);
  for (std::size_t i = 0; i < work.v.size(); ++i) {
    double ph = -0.5 * dt * k2[i];
    work.v[i] *= cplx(std::cos(ph), std::sin(ph));
  }
  fft::inverse_inplace(g, work.v.data());

  auto w = detail::nonlinear_phase_potential(work, p);
  for (std::size_t i = 0; i < work.v.size(); ++i) {
    double ph = dt * w[i];
    work.v[i] *= cplx(std::cos(ph), std::sin(ph));
  }

  fft::forward_inplace(g, work.v.data());
  for (std::size_t i = 0; i < work.v.size(); ++i) {
    double ph = -0.5 * dt * k2[i];
    work.v[i] *= cplx(std::cos(ph), std::sin(ph));
  }
  fft::inverse_inplace(g, work.v.data());

  if (!work.finite())
    throw numeric_error("strang_step: numerical overflow in time step");
  return work;
}

using RecordSink =
    std::function<void(std::size_t index, double t, const ComplexField&)>;

// Adaptive split-step driver. Keeps the iterate in Fourier space between
// steps (merging the bookkeeping transforms), drops the step as the gradient
// norm grows, and declares blow-up only on the conjunction of strong
// gradient growth and a floored step so resolution loss is not mistaken for
// focusing. Conservation alarms turn drifting runs into "aborted".
inline TrajectoryRecord evolve(const ComplexField& u0, const SimParams& p,
                               const EvolveConfig& cfg,
                               const LocalizationProfile* profile = nullptr,
                               const RecordSink& on_record = {}) {
  p.validate();
  cfg.validate();
  if (!u0.finite()) throw usage_error("evolve: initial data is not finite");
  if (profile) check_same_grid(u0.grid, profile->grid, "evolve");
  const GridSpec& g = u0.grid;
  auto k2 = detail::k2_table(g);

  TrajectoryRecord rec;
  auto push_row = [&](const ComplexField& u, double t, double dt) {
    DiagnosticsRow row;
    row.t = t;
    row.dt = dt;
    FunctionalReport fr = functional_report(u, p);
    row.mass = fr.mass;
    row.energy = fr.energy;
    row.lagrangian = fr.lagrangian;
    row.pohozaev = fr.pohozaev;
    row.h1dot = fr.h1dot;
    if (profile) {
      row.l4_outer = lp_norm(u, 4.0, Region::cylinder_outside, profile->R);
      VirialReport vr = virial_second_rhs(u, p, *profile);
      row.virial_V = vr.V;
      row.virial_dVdt_analytic = vr.dVdt_analytic;
      row.d2V_rhs = vr.d2V_rhs_exact;
    }
    rec.times.push_back(t);
    rec.rows.push_back(row);
    if (on_record) on_record(rec.rows.size() - 1, t, u);
    return row;
  };

  ComplexField uhat = fft::forward(u0);
  double m0 = 0.0, g0sq = 0.0;
  detail::spectral_moments(g, uhat.v, k2, m0, g0sq);
  double g0 = std::sqrt(g0sq);
  if (!(m0 > 0.0)) throw usage_error("evolve: initial data is zero");

  DiagnosticsRow row0 = push_row(u0, 0.0, 0.0);
  double e0 = row0.energy;
  double e_scale = std::max(std::abs(e0), 1e-12);

  double t = 0.0;
  double gprev = g0;
  ComplexField u(g);
  std::vector<cplx> half(uhat.v.size());
  bool done = false;
  while (!done) {
    double gcur = std::max(gprev, 1e-300);
    double dt_adapt =
        std::max(cfg.dt_min, cfg.cfl_safety * cfg.dt0 * g0 / gcur);
    bool floored = dt_adapt <= cfg.dt_min * (1.0 + 1e-12);
    double dt = dt_adapt;
    if (t + dt >= cfg.t_max) {
      dt = cfg.t_max - t;
      done = true;  // this is the closing step
      if (!(dt > 0.0)) break;
    }

    // fused step: the iterate enters and leaves in Fourier space
    for (std::size_t i = 0; i < uhat.v.size(); ++i) {
      double ph = -0.5 * dt * k2[i];
      half[i] = cplx(std::cos(ph), std::sin(ph));
      uhat.v[i] *= half[i];
    }
    u.v = uhat.v;
    fft::inverse_inplace(g, u.v.data());
    auto w = detail::nonlinear_phase_potential(u, p);
    for (std::size_t i = 0; i < u.v.size(); ++i) {
      double ph = dt * w[i];
      u.v[i] *= cplx(std::cos(ph), std::sin(ph));
    }
    uhat.v = u.v;
    fft::forward_inplace(g, uhat.v.data());
    for (std::size_t i = 0; i < uhat.v.size(); ++i) uhat.v[i] *= half[i];

    t += dt;
    ++rec.steps;

    double m_now = 0.0, gsq_now = 0.0;
    detail::spectral_moments(g, uhat.v, k2, m_now, gsq_now);
    double g_now = std::sqrt(gsq_now);

    if (!std::isfinite(m_now) || !std::isfinite(gsq_now)) {
      // overflow counts as blow-up evidence only after real growth
      if (gprev >= 2.0 * g0) {
        rec.verdict = "blowup_detected";
        rec.blowup_time_estimate = t - dt;
      } else {
        rec.verdict = "aborted";
        rec.abort_reason = "numerical overflow without prior gradient growth";
      }
      break;
    }
    gprev = g_now;

    bool at_record = (rec.steps % std::size_t(cfg.record_every) == 0) || done;

    if (g_now >= cfg.grad_blowup_factor * g0 && floored) {
      u.v = uhat.v;
      fft::inverse_inplace(g, u.v.data());
      push_row(u, t, dt);
      rec.verdict = "blowup_detected";
      rec.blowup_time_estimate = t;
      break;
    }

    if (std::abs(m_now - m0) / m0 > cfg.mass_drift_tol) {
      u.v = uhat.v;
      fft::inverse_inplace(g, u.v.data());
      push_row(u, t, dt);
      rec.verdict = "aborted";
      rec.abort_reason = "mass drift beyond tolerance";
      break;
    }

    if (at_record) {
      u.v = uhat.v;
      fft::inverse_inplace(g, u.v.data());
      DiagnosticsRow row = push_row(u, t, dt);
      if (std::abs(row.energy - e0) / e_scale > cfg.energy_drift_tol) {
        rec.verdict = "aborted";
        rec.abort_reason = "energy drift beyond tolerance";
        break;
      }
    }
  }

  rec.final_state = ComplexField(g);
  rec.final_state.v = uhat.v;
  fft::inverse_inplace(g, rec.final_state.v.data());

  // centered differences of V over the (mildly nonuniform) record times
  for (std::size_t i = 1; i + 1 < rec.rows.size(); ++i) {
    double a = rec.times[i] - rec.times[i - 1];
    double b = rec.times[i + 1] - rec.times[i];
    double vm = rec.rows[i - 1].virial_V, v0 = rec.rows[i].virial_V,
           vp = rec.rows[i + 1].virial_V;
    if (a > 0 && b > 0 && std::isfinite(vm) && std::isfinite(v0) &&
        std::isfinite(vp))
      rec.rows[i].virial_dVdt_fd =
          (vp * a * a - vm * b * b + v0 * (b * b - a * a)) /
          (a * b * (a + b));
  }
  return rec;
}

}  // namespace ds3
