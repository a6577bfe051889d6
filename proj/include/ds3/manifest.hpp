#pragma once

#include <chrono>
#include <ctime>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ds3/common.hpp"
#include "ds3/config.hpp"
#include "ds3/digest.hpp"
#include "ds3/functionals.hpp"
#include "ds3/grid.hpp"

// Run manifests. Every output directory gets exactly one manifest.json that
// records the resolved config, grid, model parameters, the numerical
// conventions the artifacts assume, and sha256 digests of the files written.
// The manifest is written last so the digests match what is on disk.
// nlohmann::json keeps object keys sorted, which gives the required
// sorted-key UTF-8 output for free.

namespace ds3 {

inline std::string iso8601_utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json grid_json(const GridSpec& g) {
  return {{"n1", g.n1}, {"n2", g.n2}, {"n3", g.n3},
          {"L1", g.L1}, {"L2", g.L2}, {"L3", g.L3}};
}

inline nlohmann::json params_json(const SimParams& p) {
  return {{"c1", p.c1}, {"c2", p.c2}, {"alpha", p.alpha}};
}

inline nlohmann::json config_json(const Config& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : cfg.kv) j[k] = v;
  return j;
}

// The assumptions an external reader needs to interpret the artifacts.
inline nlohmann::json conventions_json() {
  return {
      {"nonlocal_zero_mode", "sigma1(0) = 0"},
      {"dft_normalization", "forward unnormalized, inverse carries 1/N"},
      {"storage_order", "x3 fastest"},
      {"snapshot_format", "DS3F v1, 64-byte header, complex f64 LE pairs"},
  };
}

// Standing caveats that apply to every run, stated where the artifacts land.
inline nlohmann::json caveats_json() {
  return nlohmann::json::array(
      {"the operative threshold S(G) is the action of the converged profile; "
       "global minimality over all bound states is not certified"});
}

struct RunManifest {
  std::string command;
  Config config;
  GridSpec grid;
  SimParams params;
  std::string started_at;
  // (filename, sha256) for files in the output directory.
  std::vector<std::pair<std::string, std::string>> inputs;
  std::vector<std::pair<std::string, std::string>> outputs;
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["code_version"] = version_string;
    j["command"] = command;
    j["config"] = config_json(config);
    j["grid"] = grid_json(grid);
    j["params"] = params_json(params);
    j["conventions"] = conventions_json();
    j["caveats"] = caveats_json();
    j["started_at"] = started_at;
    j["finished_at"] = iso8601_utc_now();
    nlohmann::json ins = nlohmann::json::object();
    for (const auto& [name, digest] : inputs) ins[name] = digest;
    j["input_digests"] = ins;
    nlohmann::json outs = nlohmann::json::object();
    for (const auto& [name, digest] : outputs) outs[name] = digest;
    j["output_digests"] = outs;
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = *it;
    return j;
  }
};

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  out.flush();
  if (!out) throw io_error("write failed on " + path);
}

// Record an output file's digest from what is actually on disk.
inline void add_output(RunManifest& m, const std::string& dir,
                       const std::string& name) {
  m.outputs.emplace_back(name, sha256_file(dir + "/" + name));
}

inline void write_manifest(const std::string& dir, const RunManifest& m) {
  write_json_file(dir + "/manifest.json", m.to_json());
}

}  // namespace ds3
