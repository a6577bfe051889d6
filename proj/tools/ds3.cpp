// Command-line driver. Subcommands share the global flags; every run writes
// its artifacts plus one manifest into --out. Exit codes: 0 ok, 2 config
// error, 3 requested check failed, 4 I/O error, 1 anything else.

#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "ds3/experiments.hpp"
#include "ds3/sweep.hpp"

int main(int argc, char** argv) {
  CLI::App app{"pseudo-spectral laboratory for a focusing NLS equation with "
               "a nonlocal cubic term"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = "ds3_out";
  std::uint64_t seed = 0;
  int workers = 1;
  auto* seed_opt =
      app.add_option("--seed", seed, "override the config seed");
  app.add_option("--config", config_path, "key=value run configuration");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--workers", workers, "sweep worker threads")
      ->capture_default_str();

  auto* cmd_gs =
      app.add_subcommand("ground-state", "solve and certify a ground state");
  auto* cmd_ev = app.add_subcommand(
      "evolve", "run the time integrator, optionally gated on the blow-up "
                "criterion");
  auto* cmd_vc = app.add_subcommand(
      "virial-check", "match the second time-difference of the localized "
                      "variance against the exact term-sum");
  auto* cmd_dc = app.add_subcommand(
      "decay", "pairing decay fits and the cylindrical embedding probe");
  auto* cmd_id = app.add_subcommand(
      "identity-suite", "symbol, adjointness, radial, and contraction checks");
  auto* cmd_sw =
      app.add_subcommand("sweep", "resumable parameter sweep over axis lists");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    ds3::Config cfg;
    if (!config_path.empty()) cfg = ds3::parse_config_file(config_path);
    if (seed_opt->count() > 0) cfg.set("seed", std::to_string(seed));
    ds3::validate_keys(cfg);
    ds3::RunContext ctx{cfg, out_dir, workers};
    if (cmd_gs->parsed()) return ds3::run_ground_state(ctx);
    if (cmd_ev->parsed()) return ds3::run_evolve(ctx);
    if (cmd_vc->parsed()) return ds3::run_virial_check(ctx);
    if (cmd_dc->parsed()) return ds3::run_decay(ctx);
    if (cmd_id->parsed()) return ds3::run_identity_suite(ctx);
    if (cmd_sw->parsed()) return ds3::run_sweep(ctx);
    std::fprintf(stderr, "no subcommand selected\n");
    return 2;
  } catch (const ds3::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const ds3::io_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
