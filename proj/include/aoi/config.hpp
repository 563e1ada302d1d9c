#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aoi/error.hpp"
#include "aoi/model.hpp"

// JSON run configuration. Schema (every section and key optional):
//
//   {
//     "params": {"lambda": 1.0, "pe": 0.2, "D": 1.0},
//     "dist":   {"theta": 10}                       // two-point family
//            |  {"m1": 1, "m2": 20, "p2": 0.2}     // explicit two-point law
//            |  {"samples_file": "c.txt"},          // empirical law (simulation only)
//     "policy": {"scheme": "window-fb", "W": 8 | "inf", "B": 3, "pTx": 0.6},
//     "sim":    {"cycles": 1000000, "seed": 42, "workers": 1, "event_budget": 1000000},
//     "search": {"W_lo": 1, "W_hi": 50, "W_tol": 1e-6, "W_tol_sim": 0.05,
//                "grid_points": 64, "B_max": 12, "ptx_resolution": 16},
//     "sweep":  {"lambda": [...], "pe": [...], "theta": [...]}
//   }
//
// Unknown keys are rejected; every error names the offending key path.
namespace aoi::config {

struct SimConfig {
  std::uint64_t cycles = 1'000'000;
  std::uint64_t seed = 42;
  std::optional<unsigned> workers;
  std::uint64_t event_budget = 1'000'000;
};

struct SearchConfig {
  std::optional<double> W_lo;
  std::optional<double> W_hi;
  double W_tol = 1e-6;
  double W_tol_sim = 0.05;
  int grid_points = 64;
  int B_max = 12;
  int ptx_resolution = 16;
};

struct SweepGrids {
  std::vector<double> lambda{0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0};
  std::vector<double> pe{0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4,
                         0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8};
  std::vector<double> theta{0.0, 5.0, 10.0, 20.0, 45.0};
};

struct PolicyConfig {
  std::string scheme = "window-fb";
  double W = kUnbounded;
  int B = 1;
  double pTx = 1.0;

  PolicySpec spec() const { return make_policy(scheme, W, B, pTx); }
};

struct RunConfig {
  SystemParams params{1.0, 0.2, 1.0};
  std::optional<double> theta = 10.0;  // set when dist is the theta family
  ScDistribution dist = ScDistribution::from_theta(10.0);
  PolicyConfig policy;
  SimConfig sim;
  SearchConfig search;
  SweepGrids sweep;
};

namespace detail {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& key, const std::string& why) {
  throw Error(ErrorKind::ConfigError, key + ": " + why);
}

inline void only_keys(const json& obj, const std::string& path,
                      std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) fail(path + "." + key, "unknown key");
  }
}

inline double number(const json& v, const std::string& key) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "infinity") return kUnbounded;
    fail(key, "expected a number or \"inf\", got \"" + s + "\"");
  }
  if (!v.is_number()) fail(key, "expected a number");
  return v.get<double>();
}

inline std::int64_t integer(const json& v, const std::string& key, std::int64_t min) {
  if (!v.is_number_integer()) fail(key, "expected an integer");
  const auto n = v.get<std::int64_t>();
  if (n < min) fail(key, "must be >= " + std::to_string(min));
  return n;
}

inline std::vector<double> numbers(const json& v, const std::string& key) {
  if (!v.is_array() || v.empty()) fail(key, "expected a non-empty array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace detail

// Newline-separated durations; blank lines and '#' comments are skipped.
inline std::vector<double> read_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "dist.samples_file: cannot open " + path.string());
  std::vector<double> samples;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    ls.imbue(std::locale::classic());
    double v = 0.0;
    if (!(ls >> v)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw Error(ErrorKind::ConfigError,
                  "dist.samples_file: line " + std::to_string(lineno) + " is not a number");
    }
    std::string rest;
    if (ls >> rest) {
      throw Error(ErrorKind::ConfigError,
                  "dist.samples_file: line " + std::to_string(lineno) + " has trailing text");
    }
    samples.push_back(v);
  }
  return samples;
}

// Parses a configuration document; relative sample paths resolve against base_dir.
inline RunConfig parse(const std::string& text, const std::filesystem::path& base_dir = {}) {
  using detail::fail;
  using detail::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    fail("<document>", e.what());
  }
  detail::only_keys(root, "<root>", {"params", "dist", "policy", "sim", "search", "sweep"});
  RunConfig cfg;

  if (root.contains("params")) {
    const auto& p = root["params"];
    detail::only_keys(p, "params", {"lambda", "pe", "D"});
    if (p.contains("lambda")) cfg.params.lambda = detail::number(p["lambda"], "params.lambda");
    if (p.contains("pe")) cfg.params.pe = detail::number(p["pe"], "params.pe");
    if (p.contains("D")) cfg.params.D = detail::number(p["D"], "params.D");
    if (!(cfg.params.lambda > 0.0) || !std::isfinite(cfg.params.lambda)) fail("params.lambda", "must be finite and > 0");
    if (!(cfg.params.pe >= 0.0 && cfg.params.pe < 1.0)) fail("params.pe", "must lie in [0, 1)");
    if (!(cfg.params.D > 0.0) || !std::isfinite(cfg.params.D)) fail("params.D", "must be finite and > 0");
  }

  if (root.contains("dist")) {
    const auto& d = root["dist"];
    detail::only_keys(d, "dist", {"theta", "m1", "m2", "p2", "samples_file"});
    const int forms = int(d.contains("theta")) + int(d.contains("m1") || d.contains("m2") || d.contains("p2")) +
                      int(d.contains("samples_file"));
    if (forms != 1) fail("dist", "give exactly one of theta, m1/m2/p2, samples_file");
    if (d.contains("theta")) {
      const double theta = detail::number(d["theta"], "dist.theta");
      if (!(theta >= 0.0) || !std::isfinite(theta)) fail("dist.theta", "must be finite and >= 0");
      cfg.theta = theta;
      cfg.dist = ScDistribution::from_theta(theta);
    } else if (d.contains("samples_file")) {
      if (!d["samples_file"].is_string()) fail("dist.samples_file", "expected a path string");
      std::filesystem::path path = d["samples_file"].get<std::string>();
      if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
      cfg.theta.reset();
      try {
        cfg.dist = ScDistribution::empirical(read_samples(path));
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::ConfigError) throw;
        fail("dist.samples_file", e.what());
      }
    } else {
      for (const char* k : {"m1", "m2", "p2"}) {
        if (!d.contains(k)) fail(std::string("dist.") + k, "missing (m1, m2 and p2 go together)");
      }
      const double m1 = detail::number(d["m1"], "dist.m1");
      const double m2 = detail::number(d["m2"], "dist.m2");
      const double p2 = detail::number(d["p2"], "dist.p2");
      if (!(m1 >= 0.0) || !std::isfinite(m1)) fail("dist.m1", "must be finite and >= 0");
      if (!(m2 >= m1) || !std::isfinite(m2)) fail("dist.m2", "must be finite and >= m1");
      if (!(p2 >= 0.0 && p2 <= 1.0)) fail("dist.p2", "must lie in [0, 1]");
      cfg.theta.reset();
      cfg.dist = ScDistribution::two_point(m1, m2, p2);
    }
  }

  if (root.contains("policy")) {
    const auto& p = root["policy"];
    detail::only_keys(p, "policy", {"scheme", "W", "B", "pTx"});
    if (p.contains("scheme")) {
      if (!p["scheme"].is_string()) fail("policy.scheme", "expected a scheme name");
      cfg.policy.scheme = p["scheme"].get<std::string>();
      bool known = false;
      for (const char* s : kSchemeNames) known = known || cfg.policy.scheme == s;
      if (!known) fail("policy.scheme", "unknown scheme '" + cfg.policy.scheme + "'");
    }
    if (p.contains("W")) cfg.policy.W = detail::number(p["W"], "policy.W");
    if (p.contains("B")) cfg.policy.B = static_cast<int>(detail::integer(p["B"], "policy.B", 1));
    if (p.contains("pTx")) cfg.policy.pTx = detail::number(p["pTx"], "policy.pTx");
  }

  if (root.contains("sim")) {
    const auto& s = root["sim"];
    detail::only_keys(s, "sim", {"cycles", "seed", "workers", "event_budget"});
    if (s.contains("cycles")) cfg.sim.cycles = detail::integer(s["cycles"], "sim.cycles", 1);
    if (s.contains("seed")) {
      if (!s["seed"].is_number_unsigned()) fail("sim.seed", "expected a non-negative integer");
      cfg.sim.seed = s["seed"].get<std::uint64_t>();
    }
    if (s.contains("workers")) cfg.sim.workers = static_cast<unsigned>(detail::integer(s["workers"], "sim.workers", 1));
    if (s.contains("event_budget")) cfg.sim.event_budget = detail::integer(s["event_budget"], "sim.event_budget", 1);
  }

  if (root.contains("search")) {
    const auto& s = root["search"];
    detail::only_keys(s, "search", {"W_lo", "W_hi", "W_tol", "W_tol_sim", "grid_points", "B_max", "ptx_resolution"});
    if (s.contains("W_lo")) cfg.search.W_lo = detail::number(s["W_lo"], "search.W_lo");
    if (s.contains("W_hi")) cfg.search.W_hi = detail::number(s["W_hi"], "search.W_hi");
    if (s.contains("W_tol")) cfg.search.W_tol = detail::number(s["W_tol"], "search.W_tol");
    if (s.contains("W_tol_sim")) cfg.search.W_tol_sim = detail::number(s["W_tol_sim"], "search.W_tol_sim");
    if (s.contains("grid_points")) cfg.search.grid_points = static_cast<int>(detail::integer(s["grid_points"], "search.grid_points", 3));
    if (s.contains("B_max")) cfg.search.B_max = static_cast<int>(detail::integer(s["B_max"], "search.B_max", 1));
    if (s.contains("ptx_resolution")) {
      cfg.search.ptx_resolution = static_cast<int>(detail::integer(s["ptx_resolution"], "search.ptx_resolution", 8));
    }
    if (!(cfg.search.W_tol > 0.0)) fail("search.W_tol", "must be > 0");
    if (!(cfg.search.W_tol_sim > 0.0)) fail("search.W_tol_sim", "must be > 0");
  }

  if (root.contains("sweep")) {
    const auto& s = root["sweep"];
    detail::only_keys(s, "sweep", {"lambda", "pe", "theta"});
    if (s.contains("lambda")) cfg.sweep.lambda = detail::numbers(s["lambda"], "sweep.lambda");
    if (s.contains("pe")) cfg.sweep.pe = detail::numbers(s["pe"], "sweep.pe");
    if (s.contains("theta")) cfg.sweep.theta = detail::numbers(s["theta"], "sweep.theta");
  }
  return cfg;
}

inline RunConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "--config: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.parent_path());
}

}  // namespace aoi::config
