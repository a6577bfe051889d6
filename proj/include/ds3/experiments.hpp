#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ds3/common.hpp"
#include "ds3/config.hpp"
#include "ds3/digest.hpp"
#include "ds3/evolution.hpp"
#include "ds3/field.hpp"
#include "ds3/functionals.hpp"
#include "ds3/grid.hpp"
#include "ds3/ground_state.hpp"
#include "ds3/kernel_decay.hpp"
#include "ds3/manifest.hpp"
#include "ds3/rng.hpp"
#include "ds3/snapshot.hpp"
#include "ds3/spectral.hpp"
#include "ds3/virial.hpp"

// Drivers behind the CLI subcommands. Each run_* takes a resolved config and
// an output directory, writes that command's artifacts (reports, CSV,
// snapshots, one manifest), and returns the process exit code: 0 for
// success, 3 when the requested checks ran and the tested property failed,
// 1 for a solver that gave up. config_error and io_error propagate to the
// CLI boundary, which maps them to exits 2 and 4.

namespace ds3 {

struct RunContext {
  Config cfg;  // resolved: CLI overrides already folded in
  std::string out_dir;
  int workers = 1;
};

inline GridSpec grid_from_config(const Config& c) {
  return GridSpec(int(c.integer("grid.n1", 64)), int(c.integer("grid.n2", 64)),
                  int(c.integer("grid.n3", 64)), c.num("grid.L1", 16.0),
                  c.num("grid.L2", 16.0), c.num("grid.L3", 16.0));
}

inline SimParams params_from_config(const Config& c) {
  SimParams p{c.num("model.c1", 1.0), c.num("model.c2", 1.0),
              c.num("model.alpha", 2.0)};
  p.validate();
  return p;
}

inline std::uint64_t seed_from_config(const Config& c) {
  return std::uint64_t(c.integer("seed", 0));
}

inline void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw io_error("cannot create output directory " + dir + ": " +
                   ec.message());
}

inline RunManifest start_manifest(const RunContext& ctx,
                                  const std::string& command,
                                  const GridSpec& g, const SimParams& p) {
  RunManifest m;
  m.command = command;
  m.config = ctx.cfg;
  m.grid = g;
  m.params = p;
  m.started_at = iso8601_utc_now();
  return m;
}

// ---------------------------------------------------------------------------
// report serialization
// ---------------------------------------------------------------------------

inline nlohmann::json certification_json(const Certification& c) {
  return {{"passed", c.passed},
          {"residual", c.residual},
          {"pairing_rel", c.pairing_rel},
          {"pohozaev_rel", c.pohozaev_rel},
          {"cylindrical_dev", c.cylindrical_dev},
          {"reality_dev", c.reality_dev},
          {"action_S", c.action_S},
          {"mass", c.mass},
          {"kinetic", c.kinetic},
          {"failures", c.failures}};
}

inline nlohmann::json criterion_json(const CriterionVerdict& v) {
  return {{"S_u0", v.S_u0},
          {"S_G", v.S_G},
          {"P_u0", v.P_u0},
          {"in_sigma1", v.in_sigma1},
          {"alpha_in_window", v.alpha_in_window},
          {"satisfied", v.satisfied},
          {"margin_S", v.margin_S},
          {"margin_P", v.margin_P},
          {"sigma1_deviation", v.sigma1_deviation}};
}

inline nlohmann::json profile_json(const LocalizationProfile& prof) {
  const char* kind = "analytic_bump";
  if (prof.eta_spec.kind == EtaSpec::Kind::quadratic) kind = "quadratic";
  if (prof.eta_spec.kind == EtaSpec::Kind::table) kind = "table";
  const auto& tab = prof.psi->h_table();
  std::string bytes(reinterpret_cast<const char*>(tab.data()),
                    tab.size() * sizeof(double));
  return {{"R", prof.R},
          {"eta", kind},
          {"normalization", prof.psi->normalization()},
          {"psi_table_sha256", sha256_hex(bytes)}};
}

inline nlohmann::json fit_json(const DecayFit& fit) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& pt : fit.points)
    pts.push_back(
        {{"R", pt.R}, {"value", pt.value}, {"excluded", pt.excluded}});
  return {{"operator", fit.op},       {"slope", fit.slope},
          {"intercept", fit.intercept}, {"slope_ci", fit.slope_ci},
          {"n_used", fit.n_used},     {"points", pts}};
}

// a sub-check line in a machine-readable report
inline nlohmann::json check_json(double value, double lo, double hi,
                                 bool pass) {
  return {{"value", value}, {"bound_lo", lo}, {"bound_hi", hi}, {"pass", pass}};
}

// ---------------------------------------------------------------------------
// diagnostics CSV
// ---------------------------------------------------------------------------

// %.17g round-trips doubles exactly, so identical trajectories give
// byte-identical files
inline std::string csv_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_diagnostics_csv(const std::string& path,
                                  const TrajectoryRecord& rec) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open " + path + " for writing");
  out << diagnostics_csv_header << "\n";
  for (const DiagnosticsRow& r : rec.rows) {
    out << csv_number(r.t) << ',' << csv_number(r.dt) << ','
        << csv_number(r.mass) << ',' << csv_number(r.energy) << ','
        << csv_number(r.lagrangian) << ',' << csv_number(r.pohozaev) << ','
        << csv_number(r.h1dot) << ',' << csv_number(r.l4_outer) << ','
        << csv_number(r.virial_V) << ','
        << csv_number(r.virial_dVdt_analytic) << ','
        << csv_number(r.virial_dVdt_fd) << ',' << csv_number(r.d2V_rhs)
        << "\n";
  }
  out.flush();
  if (!out) throw io_error("write failed on " + path);
}

// one instant of diagnostics without stepping; used for the degenerate
// zero-horizon run
inline DiagnosticsRow instantaneous_row(const ComplexField& u,
                                        const SimParams& p,
                                        const LocalizationProfile* prof) {
  DiagnosticsRow r;
  FunctionalReport f = functional_report(u, p);
  r.mass = f.mass;
  r.energy = f.energy;
  r.lagrangian = f.lagrangian;
  r.pohozaev = f.pohozaev;
  r.h1dot = f.h1dot;
  if (prof) {
    r.l4_outer = lp_norm(u, 4.0, Region::cylinder_outside, prof->R);
    VirialReport v = virial_second_rhs(u, p, *prof);
    r.virial_V = v.V;
    r.virial_dVdt_analytic = v.dVdt_analytic;
    r.d2V_rhs = v.d2V_rhs_exact;
  }
  return r;
}

// ---------------------------------------------------------------------------
// convexity mechanism
// ---------------------------------------------------------------------------

struct ConcavityScan {
  int concave = 0;
  int interior = 0;
  double fraction = 0.0;
};

// Second differences of the recorded V(t) on a time-uniform subsample. The
// recorder tightens dt near blow-up, so consecutive raw records oversample
// the under-resolved last instants; picking the nearest record to each tick
// of a uniform lattice weights the run evenly in time. The three-point
// stencil handles the residual non-uniform spacing exactly.
inline ConcavityScan concavity_scan(const TrajectoryRecord& rec,
                                    double sample_dt) {
  ConcavityScan s;
  if (rec.rows.size() < 3 || !(sample_dt > 0.0)) return s;
  std::vector<std::size_t> pick;
  double t0 = rec.times.front(), t_end = rec.times.back();
  std::size_t j = 0;
  for (double tk = t0; tk <= t_end + 1e-12; tk += sample_dt) {
    while (j + 1 < rec.times.size() &&
           std::abs(rec.times[j + 1] - tk) <= std::abs(rec.times[j] - tk))
      ++j;
    if (pick.empty() || j != pick.back()) pick.push_back(j);
  }
  for (std::size_t i = 1; i + 1 < pick.size(); ++i) {
    double tm = rec.times[pick[i - 1]], tc = rec.times[pick[i]],
           tp = rec.times[pick[i + 1]];
    double a = tc - tm, b = tp - tc;
    double d2 = 2.0 *
                (rec.rows[pick[i + 1]].virial_V * a -
                 rec.rows[pick[i]].virial_V * (a + b) +
                 rec.rows[pick[i - 1]].virial_V * b) /
                (a * b * (a + b));
    ++s.interior;
    if (d2 < 0.0) ++s.concave;
  }
  if (s.interior > 0) s.fraction = double(s.concave) / double(s.interior);
  return s;
}

struct ConvexitySummary {
  bool all_negative = false;  // d2V_rhs < 0 at every recorded time
  double rhs_running_sup = -std::numeric_limits<double>::infinity();
  double epsilon_bar = std::numeric_limits<double>::infinity();  // min -P/K
  ConcavityScan concavity;
  double sample_dt = 0.0;
  std::string verdict;  // concave | mixed | inconclusive
};

inline ConvexitySummary summarize_convexity(const TrajectoryRecord& rec,
                                            double sample_dt = 0.0) {
  ConvexitySummary s;
  if (rec.verdict == "aborted" || rec.rows.size() < 3) {
    s.verdict = "inconclusive";
    return s;
  }
  s.all_negative = true;
  for (const DiagnosticsRow& r : rec.rows) {
    if (!(r.d2V_rhs < 0.0)) s.all_negative = false;
    s.rhs_running_sup = std::max(s.rhs_running_sup, r.d2V_rhs);
    double K = r.h1dot * r.h1dot;
    if (K > 0.0) s.epsilon_bar = std::min(s.epsilon_bar, -r.pohozaev / K);
  }
  double span = rec.times.back() - rec.times.front();
  s.sample_dt = sample_dt > 0.0 ? sample_dt : span / 120.0;
  s.concavity = concavity_scan(rec, s.sample_dt);
  s.verdict = (s.all_negative && s.concavity.fraction >= 0.95) ? "concave"
                                                               : "mixed";
  return s;
}

inline nlohmann::json convexity_json(const ConvexitySummary& s) {
  return {{"all_negative", s.all_negative},
          {"rhs_running_sup", s.rhs_running_sup},
          {"epsilon_bar", s.epsilon_bar},
          {"concave", s.concavity.concave},
          {"interior", s.concavity.interior},
          {"concavity_fraction", s.concavity.fraction},
          {"sample_dt", s.sample_dt},
          {"verdict", s.verdict}};
}

struct ConvexityExperiment {
  CriterionVerdict criterion;
  TrajectoryRecord trajectory;
  ConvexitySummary summary;
};

// Runs the localized-variance mechanism end to end: gate on the blow-up
// criterion, evolve, then summarize the sign structure of d2V along the run.
inline ConvexityExperiment convexity_experiment(
    const ComplexField& u0, const SimParams& p, const GroundStateResult& gs,
    const Certification& cert, const LocalizationProfile& prof,
    const EvolveConfig& cfg, double sample_dt = 0.0) {
  ConvexityExperiment ex;
  ex.criterion = criterion_check(u0, p, gs, cert);
  if (!ex.criterion.satisfied)
    throw usage_error(
        "convexity_experiment: blow-up criterion not satisfied for this "
        "initial data");
  ex.trajectory = evolve(u0, p, cfg, &prof);
  ex.summary = summarize_convexity(ex.trajectory, sample_dt);
  return ex;
}

// ---------------------------------------------------------------------------
// ground-state command
// ---------------------------------------------------------------------------

inline GroundStateResult solve_ground_state(const Config& cfg,
                                            const GridSpec& g,
                                            const SimParams& p) {
  GroundStateOptions opts;
  opts.tol = cfg.num("gs.tol", 1e-8);
  opts.max_iter = int(cfg.integer("gs.max_iter", 800));
  std::string method = cfg.str("gs.method", "petviashvili");
  if (method == "petviashvili") return petviashvili_solve(p, g, opts);
  if (method == "gradient_flow") return gradient_flow_solve(p, g, opts);
  throw config_error("gs.method must be petviashvili or gradient_flow, got " +
                     method);
}

inline int run_ground_state(const RunContext& ctx) {
  const Config& cfg = ctx.cfg;
  GridSpec g = grid_from_config(cfg);
  SimParams p = params_from_config(cfg);
  ensure_out_dir(ctx.out_dir);
  RunManifest m = start_manifest(ctx, "ground-state", g, p);

  GroundStateResult gs = solve_ground_state(cfg, g, p);
  nlohmann::json j;
  j["method"] = gs.method;
  j["converged"] = gs.converged;
  j["iterations"] = gs.iterations;
  j["residual"] = gs.residual;
  j["params"] = params_json(p);
  j["grid"] = grid_json(g);
  if (!gs.converged) {
    j["diagnostic"] = gs.diagnostic;
    std::size_t n = gs.residual_history.size();
    std::vector<double> tail(
        gs.residual_history.begin() + (n > 20 ? n - 20 : 0),
        gs.residual_history.end());
    j["residual_tail"] = tail;
    write_json_file(ctx.out_dir + "/ground_state.json", j);
    add_output(m, ctx.out_dir, "ground_state.json");
    m.extra["status"] = "not_converged";
    write_manifest(ctx.out_dir, m);
    return 1;
  }

  Certification cert = certify(gs, p);
  j["certification"] = certification_json(cert);
  FunctionalReport f = functional_report(gs.Q, p);
  j["functionals"] = {{"mass", f.mass},
                      {"h1dot", f.h1dot},
                      {"energy", f.energy},
                      {"action_S", f.lagrangian},
                      {"pohozaev", f.pohozaev}};
  write_snapshot(ctx.out_dir + "/q.snap", gs.Q);
  write_json_file(ctx.out_dir + "/ground_state.json", j);
  add_output(m, ctx.out_dir, "q.snap");
  add_output(m, ctx.out_dir, "ground_state.json");
  write_manifest(ctx.out_dir, m);
  return 0;
}

// ---------------------------------------------------------------------------
// evolve command
// ---------------------------------------------------------------------------

inline EvolveConfig evolve_config_from(const Config& cfg) {
  EvolveConfig e;
  e.dt0 = cfg.num("evolve.dt0", e.dt0);
  e.t_max = cfg.num("evolve.t_max", e.t_max);
  e.dt_min = cfg.num("evolve.dt_min", e.dt_min);
  e.grad_blowup_factor =
      cfg.num("evolve.grad_blowup_factor", e.grad_blowup_factor);
  e.cfl_safety = cfg.num("evolve.cfl_safety", e.cfl_safety);
  e.record_every = int(cfg.integer("evolve.record_every", e.record_every));
  e.mass_drift_tol = cfg.num("evolve.mass_drift_tol", e.mass_drift_tol);
  e.energy_drift_tol = cfg.num("evolve.energy_drift_tol", e.energy_drift_tol);
  return e;
}

// Certification gate for the evolve path. The strict tolerances live in the
// ground-state command; here the gate only needs to reject data that is not
// a ground state for these parameters. The Pohozaev and symmetry residuals
// carry grid truncation floors (the transverse tail wraps around the torus),
// so they sit at coarse-grid scale.
inline CertifyOptions evolve_certify_options(const Config& cfg) {
  CertifyOptions co;
  co.residual_tol = 10.0 * cfg.num("gs.tol", 1e-8);
  co.pairing_tol = 1e-6;
  co.pohozaev_tol = 0.1;
  co.symmetry_tol = 1e-2;
  co.reality_tol = 1e-8;
  return co;
}

inline int run_evolve(const RunContext& ctx) {
  const Config& cfg = ctx.cfg;
  GridSpec g = grid_from_config(cfg);
  SimParams p = params_from_config(cfg);
  ensure_out_dir(ctx.out_dir);
  RunManifest m = start_manifest(ctx, "evolve", g, p);

  std::optional<LocalizationProfile> prof;
  if (cfg.has("virial.R")) {
    prof.emplace(build_profile(cfg.num("virial.R", 0.0), g));
    m.extra["profile"] = profile_json(*prof);
  }
  bool want_convexity = cfg.boolean("evolve.convexity", false);
  if (want_convexity && !prof)
    throw config_error("evolve.convexity needs virial.R");

  std::string initial = cfg.str("evolve.initial", "gamma_scale");
  ComplexField u0(g);
  std::optional<CriterionVerdict> verdict;
  nlohmann::json vj;
  if (initial == "gamma_scale") {
    GroundStateResult gs;
    if (cfg.has("evolve.q_path")) {
      gs.Q = read_snapshot(cfg.require("evolve.q_path"));
      if (!(gs.Q.grid == g))
        throw config_error("evolve.q_path snapshot grid does not match grid.*");
      gs.converged = true;
      gs.method = "loaded";
      gs.params = p;
    } else {
      gs = solve_ground_state(cfg, g, p);
      if (!gs.converged) {
        vj["verdict"] = "ground_state_not_converged";
        vj["diagnostic"] = gs.diagnostic;
        write_json_file(ctx.out_dir + "/verdict.json", vj);
        add_output(m, ctx.out_dir, "verdict.json");
        write_manifest(ctx.out_dir, m);
        return 1;
      }
    }
    Certification cert = certify(gs, p, evolve_certify_options(cfg));
    if (!cert.passed) {
      std::string what = "evolve: ground state failed certification:";
      for (const std::string& fail : cert.failures) what += " " + fail;
      throw config_error(what);
    }
    double gamma = cfg.num("evolve.gamma_scale", 1.0);
    u0 = gs.Q;
    for (cplx& z : u0.v) z *= gamma;
    verdict = criterion_check(u0, p, gs, cert);
    vj["criterion"] = criterion_json(*verdict);
    vj["certification"] = certification_json(cert);
  } else if (initial == "snapshot") {
    u0 = read_snapshot(cfg.require("evolve.q_path"));
    if (!(u0.grid == g))
      throw config_error("evolve.q_path snapshot grid does not match grid.*");
  } else {
    throw config_error("evolve.initial must be gamma_scale or snapshot, got " +
                       initial);
  }

  bool expect = cfg.boolean("evolve.expect_criterion", false);
  if (expect && !verdict)
    throw config_error("evolve.expect_criterion needs gamma_scale initial data");
  if (expect && !verdict->satisfied) {
    vj["verdict"] = "criterion_unsatisfied";
    write_json_file(ctx.out_dir + "/verdict.json", vj);
    add_output(m, ctx.out_dir, "verdict.json");
    write_manifest(ctx.out_dir, m);
    return 3;
  }

  double t_max = cfg.num("evolve.t_max", 1.0);
  const LocalizationProfile* profp = prof ? &*prof : nullptr;
  if (t_max == 0.0) {
    TrajectoryRecord rec;
    rec.times = {0.0};
    rec.rows = {instantaneous_row(u0, p, profp)};
    write_diagnostics_csv(ctx.out_dir + "/diagnostics.csv", rec);
    vj["verdict"] = rec.verdict;
    vj["steps"] = 0;
    write_json_file(ctx.out_dir + "/verdict.json", vj);
    add_output(m, ctx.out_dir, "diagnostics.csv");
    add_output(m, ctx.out_dir, "verdict.json");
    write_manifest(ctx.out_dir, m);
    return 0;
  }

  EvolveConfig ecfg = evolve_config_from(cfg);
  long snap_every = cfg.integer("evolve.snapshot_every", 0);
  std::vector<std::string> snaps;
  RecordSink sink;
  if (snap_every > 0) {
    sink = [&](std::size_t index, double, const ComplexField& u) {
      if (index % std::size_t(snap_every)) return;
      char name[32];
      std::snprintf(name, sizeof name, "state_%06zu.snap", index);
      write_snapshot(ctx.out_dir + "/" + name, u);
      snaps.push_back(name);
    };
  }

  TrajectoryRecord rec = evolve(u0, p, ecfg, profp, sink);
  write_diagnostics_csv(ctx.out_dir + "/diagnostics.csv", rec);
  write_snapshot(ctx.out_dir + "/final.snap", rec.final_state);
  vj["verdict"] = rec.verdict;
  vj["steps"] = rec.steps;
  vj["recorded_rows"] = rec.rows.size();
  if (rec.blowup_time_estimate)
    vj["blowup_time_estimate"] = *rec.blowup_time_estimate;
  if (!rec.abort_reason.empty()) vj["abort_reason"] = rec.abort_reason;
  if (want_convexity) {
    ConvexitySummary cs =
        summarize_convexity(rec, cfg.num("evolve.concavity_dt", 0.0));
    vj["convexity"] = convexity_json(cs);
  }
  write_json_file(ctx.out_dir + "/verdict.json", vj);
  add_output(m, ctx.out_dir, "diagnostics.csv");
  add_output(m, ctx.out_dir, "final.snap");
  add_output(m, ctx.out_dir, "verdict.json");
  for (const std::string& name : snaps) add_output(m, ctx.out_dir, name);
  m.extra["verdict"] = rec.verdict;
  write_manifest(ctx.out_dir, m);
  return 0;
}

// ---------------------------------------------------------------------------
// virial-check command
// ---------------------------------------------------------------------------

// One dt level: a pinned-step run on a smooth pulse, then the worst relative
// mismatch between the centered second difference of recorded V and the
// term-sum. Trios with uneven spacing (the trimmed closing step) are skipped.
struct VirialCheckLevel {
  double dt = 0.0;
  double accuracy = 0.0;
  int rows_used = 0;
};

inline VirialCheckLevel virial_check_level(const GridSpec& g,
                                           const SimParams& p,
                                           const ComplexField& u0,
                                           const LocalizationProfile& prof,
                                           double dt, double t_max,
                                           int record_every) {
  EvolveConfig cfg;
  cfg.dt0 = dt;
  cfg.dt_min = dt * (1.0 - 1e-9);  // pinned step: adaptivity cannot fire
  cfg.cfl_safety = 1.0;
  cfg.t_max = t_max;
  cfg.record_every = record_every;
  cfg.grad_blowup_factor = 100.0;
  cfg.mass_drift_tol = 1e-6;
  cfg.energy_drift_tol = 1e-1;
  TrajectoryRecord rec = evolve(u0, p, cfg, &prof);
  VirialCheckLevel lvl;
  lvl.dt = dt;
  for (std::size_t i = 1; i + 1 < rec.rows.size(); ++i) {
    double a = rec.times[i] - rec.times[i - 1];
    double b = rec.times[i + 1] - rec.times[i];
    if (std::abs(b - a) > 0.01 * std::max(a, b)) continue;
    double d2 = 2.0 *
                (rec.rows[i + 1].virial_V * a -
                 rec.rows[i].virial_V * (a + b) +
                 rec.rows[i - 1].virial_V * b) /
                (a * b * (a + b));
    ++lvl.rows_used;
    lvl.accuracy = std::max(lvl.accuracy, std::abs(d2 - rec.rows[i].d2V_rhs) /
                                              std::abs(rec.rows[i].d2V_rhs));
  }
  if (lvl.rows_used == 0)
    throw config_error(
        "virial-check: no interior records; raise vcheck.t_max or lower "
        "vcheck.dt0");
  return lvl;
}

inline int run_virial_check(const RunContext& ctx) {
  const Config& cfg = ctx.cfg;
  GridSpec g = grid_from_config(cfg);
  SimParams p = params_from_config(cfg);
  ensure_out_dir(ctx.out_dir);
  RunManifest m = start_manifest(ctx, "virial-check", g, p);

  double amp = cfg.num("vcheck.amp", 2.8);
  double width = cfg.num("vcheck.width", 0.7);
  double phase_k = cfg.num("vcheck.phase_k", 0.5);
  double dt0 = cfg.num("vcheck.dt0", 1e-4);
  int halvings = int(cfg.integer("vcheck.halvings", 1));
  double t_max = cfg.num("vcheck.t_max", 0.05);
  double tol = cfg.num("vcheck.tol", 1e-3);
  double R = cfg.num("virial.R", 2.5);
  if (!(dt0 > 0.0) || !(t_max > dt0) || halvings < 0)
    throw config_error("virial-check: need dt0 > 0, t_max > dt0, halvings >= 0");

  ComplexField u0 = ComplexField::sample(g, [&](double x, double y, double z) {
    double a = amp * std::exp(-width * (x * x + y * y + z * z));
    return cplx(a * std::cos(phase_k * x), a * std::sin(phase_k * x));
  });
  LocalizationProfile prof = build_profile(R, g);

  // record spacing scales with dt (record_every fixed across levels), so the
  // stencil error and the trajectory error halve together at second order
  int steps0 = int(std::lround(t_max / dt0));
  int record_every = std::max(1, steps0 / 10);

  std::vector<VirialCheckLevel> levels;
  for (int k = 0; k <= halvings; ++k)
    levels.push_back(virial_check_level(g, p, u0, prof, dt0 / double(1 << k),
                                        t_max, record_every));
  std::vector<double> orders;
  for (std::size_t k = 0; k + 1 < levels.size(); ++k)
    orders.push_back(std::log2(levels[k].accuracy / levels[k + 1].accuracy));

  bool accuracy_ok = levels.front().accuracy <= tol;
  bool order_ok = true;
  for (double o : orders) order_ok = order_ok && (o >= 1.7 && o <= 2.3);
  bool pass = accuracy_ok && order_ok;

  nlohmann::json j;
  nlohmann::json lv = nlohmann::json::array();
  for (const VirialCheckLevel& l : levels)
    lv.push_back(
        {{"dt", l.dt}, {"accuracy", l.accuracy}, {"rows_used", l.rows_used}});
  j["levels"] = lv;
  j["orders"] = orders;
  j["profile"] = profile_json(prof);
  j["checks"] = {
      {"accuracy", check_json(levels.front().accuracy, 0.0, tol, accuracy_ok)},
      {"order",
       check_json(orders.empty() ? 2.0 : orders.back(), 1.7, 2.3, order_ok)}};
  j["pass"] = pass;
  write_json_file(ctx.out_dir + "/virial_check.json", j);
  add_output(m, ctx.out_dir, "virial_check.json");
  m.extra["pass"] = pass;
  write_manifest(ctx.out_dir, m);
  return pass ? 0 : 3;
}

// ---------------------------------------------------------------------------
// decay command
// ---------------------------------------------------------------------------

inline int run_decay(const RunContext& ctx) {
  const Config& cfg = ctx.cfg;
  GridSpec g = grid_from_config(cfg);
  SimParams p = params_from_config(cfg);
  ensure_out_dir(ctx.out_dir);
  RunManifest m = start_manifest(ctx, "decay", g, p);

  std::string which = cfg.str("decay.operator", "both");
  std::vector<std::string> ops;
  if (which == "both")
    ops = {"E1", "E1sq"};
  else if (which == "E1" || which == "E1sq")
    ops = {which};
  else
    throw config_error("decay.operator must be E1, E1sq, or both");

  std::vector<double> R_values = cfg.list_num("decay.R_values");
  if (R_values.empty()) R_values = {1.5, 2.0, 3.0, 4.0};

  double slope_lo = cfg.num("decay.slope_min", -3.3);
  double slope_hi = cfg.num("decay.slope_max", -2.7);

  nlohmann::json j;
  nlohmann::json fits = nlohmann::json::array();
  bool pass = true;
  nlohmann::json checks = nlohmann::json::object();
  for (const std::string& op : ops) {
    DecayExperimentSpec spec;
    spec.op = op;
    spec.grid = g;
    spec.gamma1 = cfg.num("decay.gamma1", spec.gamma1);
    spec.gamma2 = cfg.num("decay.gamma2", spec.gamma2);
    spec.ring_width = cfg.num("decay.ring_width", spec.ring_width);
    spec.x1_extent = cfg.num("decay.x1_extent", spec.x1_extent);
    spec.R_values = R_values;
    DecayFit fit = pairing_decay_experiment(spec);
    fits.push_back(fit_json(fit));
    bool ok = fit.slope >= slope_lo && fit.slope <= slope_hi;
    checks["slope_" + op] = check_json(fit.slope, slope_lo, slope_hi, ok);
    pass = pass && ok;
  }
  j["fits"] = fits;

  long samples = cfg.integer("strauss.samples", 0);
  if (samples > 0) {
    double R = cfg.num("strauss.R", 0.0);
    CounterRng rng(seed_from_config(cfg), 0);
    StraussReport lo = strauss_check(int(samples), R, g, rng);
    StraussReport hi = strauss_check(int(samples), 2.0 * R, g, rng);
    double factor = hi.max_ratio / lo.max_ratio;
    j["strauss"] = {{"R", R},
                    {"samples", samples},
                    {"max_ratio", lo.max_ratio},
                    {"mean_ratio", lo.mean_ratio},
                    {"max_ratio_2R", hi.max_ratio},
                    {"doubling_factor", factor}};
    bool finite_ok = std::isfinite(lo.max_ratio) && lo.max_ratio > 0.0;
    bool factor_ok = factor >= 0.3 && factor <= 0.8;
    checks["strauss_finite"] =
        check_json(lo.max_ratio, 0.0,
                   std::numeric_limits<double>::infinity(), finite_ok);
    checks["strauss_doubling"] = check_json(factor, 0.3, 0.8, factor_ok);
    pass = pass && finite_ok && factor_ok;
  }

  j["checks"] = checks;
  j["pass"] = pass;
  write_json_file(ctx.out_dir + "/decay.json", j);
  add_output(m, ctx.out_dir, "decay.json");
  m.extra["pass"] = pass;
  write_manifest(ctx.out_dir, m);
  return pass ? 0 : 3;
}

// ---------------------------------------------------------------------------
// identity-suite command
// ---------------------------------------------------------------------------

inline int run_identity_suite(const RunContext& ctx) {
  const Config& cfg = ctx.cfg;
  GridSpec g = grid_from_config(cfg);
  SimParams p = params_from_config(cfg);
  ensure_out_dir(ctx.out_dir);
  RunManifest m = start_manifest(ctx, "identity-suite", g, p);

  double tol_symbol = cfg.num("identity.tol_symbol", 1e-14);
  double tol_adjoint = cfg.num("identity.tol_adjoint", 1e-12);
  double tol_radial = cfg.num("identity.tol_radial", 1e-8);
  double tol_cipolatti = cfg.num("identity.tol_cipolatti", 1e-3);

  nlohmann::json checks = nlohmann::json::object();
  bool pass = true;
  auto record = [&](const std::string& name, double value, double lo,
                    double hi) {
    bool ok = value >= lo && value <= hi;
    checks[name] = check_json(value, lo, hi, ok);
    pass = pass && ok;
  };

  SymbolIdentityReport sym = symbol_identity_check(g);
  record("symbol_identity", sym.max_deviation, 0.0, tol_symbol);
  record("symbol_bound_coarse", sym.max_value, 0.0, 4.0);
  record("symbol_bound_sharp", sym.max_value, 0.0, 0.5 + 1e-14);

  // self-adjointness on white noise
  CounterRng rng(seed_from_config(cfg), 0);
  double adjoint_worst = 0.0;
  for (int trial = 0; trial < 4; ++trial) {
    CounterRng sub = rng.substream("adjoint/" + std::to_string(trial));
    ComplexField f(g), h(g);
    for (std::size_t i = 0; i < f.v.size(); ++i) {
      f.v[i] = cplx(sub.normal(), sub.normal());
      h.v[i] = cplx(sub.normal(), sub.normal());
    }
    double lhs = pairing(e1_apply(f), h);
    double rhs = pairing(f, e1_apply(h));
    adjoint_worst = std::max(
        adjoint_worst, std::abs(lhs - rhs) / (l2_norm(f) * l2_norm(h)));
  }
  record("self_adjoint", adjoint_worst, 0.0, tol_adjoint);

  // radial identity on a mean-removed isotropic Gaussian
  {
    ComplexField f = ComplexField::sample(g, [](double a, double b, double c) {
      return std::exp(-(a * a + b * b + c * c));
    });
    cplx mean(0.0);
    for (const cplx& z : f.v) mean += z;
    mean /= double(g.size());
    for (cplx& z : f.v) z -= mean;
    double got = pairing(e1_apply(f), f);
    double want = l2_norm_sq(f) / 3.0;
    record("radial_third", std::abs(got - want) / want, 0.0, tol_radial);
  }

  // Cipolatti identity on isotropic and anisotropic Gaussians. The identity
  // is exact on free space and the error is the periodization of the |x|^-3
  // kernel tail, so these run on fixed reference boxes wide enough for the
  // tail (L=16 floors near 4e-3 regardless of resolution); the anisotropic
  // profile needs the finer spacing for its tight transverse width.
  {
    ComplexField iso = ComplexField::sample(
        GridSpec::cubic(64, 32.0), [](double a, double b, double c) {
          return std::exp(-(a * a + b * b + c * c));
        });
    record("cipolatti_isotropic", cipolatti_identity_check(iso), 0.0,
           tol_cipolatti);
    ComplexField ani = ComplexField::sample(
        GridSpec::cubic(128, 32.0), [](double a, double b, double c) {
          return std::exp(-a * a - 4.0 * (b * b + c * c));
        });
    record("cipolatti_anisotropic", cipolatti_identity_check(ani), 0.0,
           tol_cipolatti);
  }

  // L2 contraction over white noise, both operators
  {
    CounterRng sub = rng.substream("contraction");
    L2BoundReport e1 = l2_boundedness_probe("E1", 100, g, sub);
    L2BoundReport e2 = l2_boundedness_probe("E1sq", 100, g, sub);
    record("contraction_E1", e1.max_ratio, 0.0, 1.0);
    record("contraction_E1sq", e2.max_ratio, 0.0, 1.0);
  }

  nlohmann::json j;
  j["checks"] = checks;
  j["pass"] = pass;
  write_json_file(ctx.out_dir + "/identity_suite.json", j);
  add_output(m, ctx.out_dir, "identity_suite.json");
  m.extra["pass"] = pass;
  write_manifest(ctx.out_dir, m);
  return pass ? 0 : 3;
}

}  // namespace ds3
