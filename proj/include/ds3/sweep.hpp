#pragma once

#include <atomic>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "ds3/experiments.hpp"

// Resumable parameter sweep. Points are the cartesian product of the axis
// lists; every point owns a resolved config (the base config with the axis
// values folded in and the sweep.* keys stripped) and is keyed by the sha256
// of that config's canonical text. Each completed point appends one JSON
// line to results.jsonl; with resume, points whose digest is already in the
// store are skipped, so an interrupted sweep converges to the same line set.

namespace ds3 {

struct SweepSpec {
  std::string task = "ground_state";  // ground_state | blowup_run | decay_fit
  std::vector<double> c1, c2, alpha, gamma_scale, R;
  int workers = 1;
  bool resume = false;
  long max_points = 4096;
};

inline SweepSpec sweep_spec_from(const Config& cfg, int workers) {
  SweepSpec s;
  s.task = cfg.str("sweep.task", "ground_state");
  if (s.task != "ground_state" && s.task != "blowup_run" &&
      s.task != "decay_fit")
    throw config_error(
        "sweep.task must be ground_state, blowup_run, or decay_fit, got " +
        s.task);
  s.c1 = cfg.list_num("sweep.c1");
  s.c2 = cfg.list_num("sweep.c2");
  s.alpha = cfg.list_num("sweep.alpha");
  s.gamma_scale = cfg.list_num("sweep.gamma_scale");
  s.R = cfg.list_num("sweep.R");
  s.workers = std::max(1, workers);
  s.resume = cfg.boolean("sweep.resume", false);
  s.max_points = cfg.integer("sweep.max_points", 4096);
  if (s.max_points < 1) throw config_error("sweep.max_points must be positive");
  return s;
}

struct SweepPoint {
  Config cfg;           // resolved point config, sweep.* stripped
  nlohmann::json axes;  // the axis values that define the point
  std::string digest;
};

// An absent axis leaves the base config's value untouched; the point then
// does not carry that coordinate.
inline std::vector<SweepPoint> sweep_points(const Config& base,
                                            const SweepSpec& spec) {
  auto levels = [](const std::vector<double>& axis) {
    std::vector<std::optional<double>> out;
    if (axis.empty())
      out.push_back(std::nullopt);
    else
      for (double v : axis) out.push_back(v);
    return out;
  };
  Config stripped = base;
  for (auto it = stripped.kv.begin(); it != stripped.kv.end();)
    it = it->first.rfind("sweep.", 0) == 0 ? stripped.kv.erase(it) : ++it;

  std::vector<SweepPoint> pts;
  for (auto c1 : levels(spec.c1))
    for (auto c2 : levels(spec.c2))
      for (auto alpha : levels(spec.alpha))
        for (auto gamma : levels(spec.gamma_scale))
          for (auto R : levels(spec.R)) {
            SweepPoint pt;
            pt.cfg = stripped;
            pt.axes = nlohmann::json::object();
            auto put = [&](const char* axis, const char* key,
                           std::optional<double> v) {
              if (!v) return;
              pt.cfg.set(key, csv_number(*v));
              pt.axes[axis] = *v;
            };
            put("c1", "model.c1", c1);
            put("c2", "model.c2", c2);
            put("alpha", "model.alpha", alpha);
            put("gamma_scale", "evolve.gamma_scale", gamma);
            // the radius axis is the localization radius for evolution
            // tasks and the cutoff radius for the embedding probe
            put("R", spec.task == "decay_fit" ? "strauss.R" : "virial.R", R);
            pt.digest = sha256_hex(pt.cfg.canonical());
            pts.push_back(std::move(pt));
            if (long(pts.size()) > spec.max_points)
              throw config_error("sweep: cartesian product exceeds "
                                 "sweep.max_points");
          }
  // axis values must form valid model parameters before any work starts
  for (const SweepPoint& pt : pts) params_from_config(pt.cfg);
  return pts;
}

inline std::set<std::string> read_store_digests(const std::string& path) {
  std::set<std::string> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // a crash can truncate the final line; anything unparseable is treated
    // as not-yet-computed
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("digest") || !j["digest"].is_string())
      continue;
    out.insert(j["digest"].get<std::string>());
  }
  return out;
}

// terminate a partial trailing line left by a crash so appended lines stay
// parseable
inline void repair_store_tail(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in || in.tellg() == std::streampos(0)) return;
  in.seekg(-1, std::ios::end);
  char last = '\n';
  in.read(&last, 1);
  in.close();
  if (last == '\n') return;
  std::ofstream out(path, std::ios::binary | std::ios::app);
  out << '\n';
}

inline nlohmann::json sweep_ground_state_task(const SweepPoint& pt) {
  GridSpec g = grid_from_config(pt.cfg);
  SimParams p = params_from_config(pt.cfg);
  GroundStateResult gs = solve_ground_state(pt.cfg, g, p);
  nlohmann::json r;
  r["converged"] = gs.converged;
  r["iterations"] = gs.iterations;
  r["residual"] = gs.residual;
  if (gs.converged) {
    FunctionalReport f = functional_report(gs.Q, p);
    r["action_S"] = f.lagrangian;
    r["mass"] = f.mass;
    r["pohozaev"] = f.pohozaev;
  }
  return r;
}

inline nlohmann::json sweep_blowup_task(const SweepPoint& pt) {
  GridSpec g = grid_from_config(pt.cfg);
  SimParams p = params_from_config(pt.cfg);
  nlohmann::json r;
  GroundStateResult gs = solve_ground_state(pt.cfg, g, p);
  if (!gs.converged) {
    r["verdict"] = "ground_state_not_converged";
    return r;
  }
  Certification cert = certify(gs, p, evolve_certify_options(pt.cfg));
  if (!cert.passed) {
    r["verdict"] = "certification_failed";
    r["failures"] = cert.failures;
    return r;
  }
  double gamma = pt.cfg.num("evolve.gamma_scale", 1.0);
  ComplexField u0 = gs.Q;
  for (cplx& z : u0.v) z *= gamma;
  CriterionVerdict verdict = criterion_check(u0, p, gs, cert);
  r["criterion_satisfied"] = verdict.satisfied;
  r["S_u0"] = verdict.S_u0;
  r["P_u0"] = verdict.P_u0;

  std::optional<LocalizationProfile> prof;
  if (pt.cfg.has("virial.R"))
    prof.emplace(build_profile(pt.cfg.num("virial.R", 0.0), g));
  TrajectoryRecord rec = evolve(u0, p, evolve_config_from(pt.cfg),
                                prof ? &*prof : nullptr);
  double g0 = rec.rows.front().h1dot, gmax = 0.0;
  for (const DiagnosticsRow& row : rec.rows)
    gmax = std::max(gmax, row.h1dot);
  r["verdict"] = rec.verdict;
  r["t_end"] = rec.times.back();
  r["grad_growth"] = g0 > 0.0 ? gmax / g0 : 0.0;
  r["steps"] = rec.steps;
  if (rec.blowup_time_estimate)
    r["blowup_time_estimate"] = *rec.blowup_time_estimate;
  return r;
}

inline nlohmann::json sweep_decay_task(const SweepPoint& pt) {
  GridSpec g = grid_from_config(pt.cfg);
  DecayExperimentSpec spec;
  spec.op = pt.cfg.str("decay.operator", "E1");
  spec.grid = g;
  spec.gamma1 = pt.cfg.num("decay.gamma1", spec.gamma1);
  spec.gamma2 = pt.cfg.num("decay.gamma2", spec.gamma2);
  spec.ring_width = pt.cfg.num("decay.ring_width", spec.ring_width);
  spec.x1_extent = pt.cfg.num("decay.x1_extent", spec.x1_extent);
  std::vector<double> R_values = pt.cfg.list_num("decay.R_values");
  spec.R_values = R_values.empty() ? std::vector<double>{1.5, 2.0, 3.0, 4.0}
                                   : R_values;
  DecayFit fit = pairing_decay_experiment(spec);
  nlohmann::json r;
  r["operator"] = fit.op;
  r["slope"] = fit.slope;
  r["slope_ci"] = fit.slope_ci;
  r["n_used"] = fit.n_used;
  if (pt.cfg.has("strauss.R")) {
    long samples = pt.cfg.integer("strauss.samples", 60);
    CounterRng rng(seed_from_config(pt.cfg), 0);
    StraussReport rep = strauss_check(int(samples),
                                      pt.cfg.num("strauss.R", 0.0), g, rng);
    r["strauss_max_ratio"] = rep.max_ratio;
  }
  return r;
}

inline nlohmann::json sweep_task_result(const std::string& task,
                                        const SweepPoint& pt) {
  if (task == "ground_state") return sweep_ground_state_task(pt);
  if (task == "blowup_run") return sweep_blowup_task(pt);
  return sweep_decay_task(pt);
}

inline int run_sweep(const RunContext& ctx) {
  const Config& cfg = ctx.cfg;
  ensure_out_dir(ctx.out_dir);
  SweepSpec spec = sweep_spec_from(cfg, ctx.workers);
  std::vector<SweepPoint> pts = sweep_points(cfg, spec);

  std::string store_path = ctx.out_dir + "/results.jsonl";
  std::set<std::string> done;
  if (spec.resume) {
    repair_store_tail(store_path);
    done = read_store_digests(store_path);
  }

  std::ofstream store(store_path, std::ios::app);
  if (!store) throw io_error("cannot open results store " + store_path);

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (!done.count(pts[i].digest)) todo.push_back(i);

  std::mutex store_mu;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> store_broken{false};
  auto worker = [&]() {
    for (;;) {
      std::size_t k = next.fetch_add(1);
      if (k >= todo.size() || store_broken.load()) return;
      const SweepPoint& pt = pts[todo[k]];
      nlohmann::json result;
      try {
        result = sweep_task_result(spec.task, pt);
      } catch (const std::exception& e) {
        // a failed point is a result, not a reason to stop the sweep
        result = nlohmann::json{{"error", e.what()}};
      }
      nlohmann::json line = {
          {"digest", pt.digest}, {"point", pt.axes}, {"result", result}};
      std::lock_guard<std::mutex> lock(store_mu);
      store << line.dump() << "\n";
      store.flush();
      if (!store) store_broken.store(true);
    }
  };

  int nworkers = int(std::min<std::size_t>(spec.workers, todo.size()));
  if (nworkers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < nworkers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (store_broken.load())
    throw io_error("write failed on results store " + store_path);
  store.close();

  RunManifest m = start_manifest(ctx, "sweep", grid_from_config(cfg),
                                 params_from_config(cfg));
  m.extra["points_total"] = pts.size();
  m.extra["points_computed"] = todo.size();
  m.extra["points_skipped"] = pts.size() - todo.size();
  add_output(m, ctx.out_dir, "results.jsonl");
  write_manifest(ctx.out_dir, m);
  return 0;
}

}  // namespace ds3
