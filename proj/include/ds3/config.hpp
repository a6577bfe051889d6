#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ds3/common.hpp"

// Flat key=value run configs. One assignment per line, '#' starts a comment,
// keys are dotted lowercase identifiers. Unknown keys are hard errors so a
// typo cannot silently fall back to a default. canonical() renders the sorted
// key=value text used to digest a resolved config.

namespace ds3 {

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'))
      return false;
  return true;
}

}  // namespace detail

struct Config {
  std::map<std::string, std::string> kv;
  std::string source_path;

  bool has(const std::string& key) const { return kv.count(key) != 0; }

  void set(const std::string& key, const std::string& value) {
    if (!detail::valid_key(key)) throw config_error("bad config key: " + key);
    kv[key] = value;
  }

  std::string str(const std::string& key, const std::string& fallback) const {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
  }

  std::string require(const std::string& key) const {
    auto it = kv.find(key);
    if (it == kv.end()) throw config_error("missing config key: " + key);
    return it->second;
  }

  double num(const std::string& key, double fallback) const {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : parse_num(key, it->second);
  }

  long integer(const std::string& key, long fallback) const {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    const std::string& v = it->second;
    char* end = nullptr;
    long r = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
      throw config_error("config key " + key + " is not an integer: " + v);
    return r;
  }

  bool boolean(const std::string& key, bool fallback) const {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw config_error("config key " + key + " is not a boolean: " + it->second);
  }

  // Comma-separated list of numbers; empty string means empty list.
  std::vector<double> list_num(const std::string& key) const {
    std::vector<double> out;
    auto it = kv.find(key);
    if (it == kv.end()) return out;
    std::stringstream ss(it->second);
    std::string piece;
    while (std::getline(ss, piece, ',')) {
      piece = detail::trim(piece);
      if (piece.empty())
        throw config_error("config key " + key + " has an empty list entry");
      out.push_back(parse_num(key, piece));
    }
    return out;
  }

  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : kv) {
      out += k;
      out += '=';
      out += v;
      out += '\n';
    }
    return out;
  }

 private:
  static double parse_num(const std::string& key, const std::string& v) {
    char* end = nullptr;
    double r = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
      throw config_error("config key " + key + " is not a number: " + v);
    return r;
  }
};

inline Config parse_config_string(const std::string& text,
                                  const std::string& origin = "<string>") {
  Config cfg;
  cfg.source_path = origin;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error(origin + ":" + std::to_string(lineno) +
                         ": expected key=value, got: " + line);
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (!detail::valid_key(key))
      throw config_error(origin + ":" + std::to_string(lineno) +
                         ": bad config key: " + key);
    if (cfg.kv.count(key))
      throw config_error(origin + ":" + std::to_string(lineno) +
                         ": duplicate config key: " + key);
    cfg.kv[key] = value;
  }
  return cfg;
}

inline Config parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw io_error("read failed on config file " + path);
  return parse_config_string(buf.str(), path);
}

// Every key any driver understands; commands share one registry so a config
// can carry keys for several stages of a pipeline.
inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "seed",
      "grid.n1", "grid.n2", "grid.n3",
      "grid.L1", "grid.L2", "grid.L3",
      "model.c1", "model.c2", "model.alpha",
      "gs.method", "gs.tol", "gs.max_iter",
      "evolve.initial", "evolve.gamma_scale", "evolve.q_path",
      "evolve.t_max", "evolve.dt0", "evolve.dt_min", "evolve.cfl_safety",
      "evolve.record_every", "evolve.mass_drift_tol", "evolve.energy_drift_tol",
      "evolve.grad_blowup_factor", "evolve.expect_criterion",
      "evolve.convexity", "evolve.concavity_dt", "evolve.snapshot_every",
      "virial.R",
      "vcheck.amp", "vcheck.width", "vcheck.phase_k",
      "vcheck.dt0", "vcheck.halvings", "vcheck.t_max", "vcheck.tol",
      "decay.operator", "decay.gamma1", "decay.gamma2", "decay.R_values",
      "decay.ring_width", "decay.x1_extent",
      "decay.slope_min", "decay.slope_max",
      "strauss.samples", "strauss.R",
      "identity.tol_symbol", "identity.tol_adjoint", "identity.tol_radial",
      "identity.tol_cipolatti",
      "sweep.task", "sweep.alpha", "sweep.c1", "sweep.c2",
      "sweep.gamma_scale", "sweep.R", "sweep.resume", "sweep.max_points",
  };
  return keys;
}

inline void validate_keys(const Config& cfg) {
  const auto& known = known_config_keys();
  for (const auto& [k, v] : cfg.kv)
    if (!known.count(k)) throw config_error("unknown config key: " + k);
}

}  // namespace ds3
