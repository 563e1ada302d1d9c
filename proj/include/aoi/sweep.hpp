#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "aoi/analytic.hpp"
#include "aoi/config.hpp"
#include "aoi/error.hpp"
#include "aoi/model.hpp"
#include "aoi/optimizer.hpp"
#include "aoi/simulator.hpp"

namespace aoi::sweep {

enum class Figure { Lambda, Pe, VarC };

inline Figure parse_figure(const std::string& name) {
  if (name == "lambda") return Figure::Lambda;
  if (name == "pe") return Figure::Pe;
  if (name == "varc") return Figure::VarC;
  throw Error(ErrorKind::InvalidParam, "unknown figure '" + name + "' (lambda | pe | varc)");
}

inline const char* sweep_variable(Figure f) {
  switch (f) {
    case Figure::Lambda: return "lambda";
    case Figure::Pe: return "pe";
    case Figure::VarC: return "theta";
  }
  return "";
}

// |sim - analytic| <= max(3 stderr, 0.5% analytic).
inline bool agrees(double sim, double std_error, double analytic) {
  return std::abs(sim - analytic) <= std::max(3.0 * std_error, 0.005 * std::abs(analytic));
}

struct SweepResult {
  std::string sweep_var;
  double sweep_value = 0.0;
  std::string scheme;
  PolicySpec best_params;
  std::optional<double> analytic_value;
  double sim_value = 0.0;
  double sim_stderr = 0.0;
  std::uint64_t n_cycles = 0;
  std::uint64_t seed = 0;

  std::string verdict() const {
    if (!analytic_value) return "sim-only";
    return agrees(sim_value, sim_stderr, *analytic_value) ? "OK" : "MISMATCH";
  }
};

// Locale-independent shortest round-trip formatting; rows never use the
// stream's numeric formatting.
inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline constexpr const char* kCsvHeader =
    "sweep_var,sweep_value,scheme,W,B,pTx,analytic,sim,stderr,n_cycles,seed,verdict";

inline void write_csv_row(std::ostream& out, const SweepResult& r) {
  std::string B, pTx;
  std::visit(
      [&](const auto& p) {
        if constexpr (requires { p.B; }) B = std::to_string(p.B);
        if constexpr (requires { p.pTx; }) pTx = format_number(p.pTx);
      },
      r.best_params);
  out << r.sweep_var << ',' << format_number(r.sweep_value) << ',' << r.scheme << ','
      << format_number(threshold_of(r.best_params)) << ',' << B << ',' << pTx << ','
      << (r.analytic_value ? format_number(*r.analytic_value) : std::string()) << ','
      << format_number(r.sim_value) << ',' << format_number(r.sim_stderr) << ','
      << std::to_string(r.n_cycles) << ',' << std::to_string(r.seed) << ',' << r.verdict() << '\n';
}

inline void write_csv(std::ostream& out, const std::vector<SweepResult>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) write_csv_row(out, r);
}

struct SweepSettings {
  Figure figure = Figure::Lambda;
  config::SweepGrids grids;
  double D = 1.0;
  std::uint64_t n_cycles = 1'000'000;
  std::uint64_t seed = 42;
  unsigned workers = 1;
  config::SearchConfig search;
  sim::SimOptions sim_options;
};

struct SweepPoint {
  double value;
  SystemParams params;
  ScDistribution dist;
};

// Figure setups: lambda sweep at theta = 10, pe = 0.2; pe sweep at theta = 10,
// lambda = 1; theta sweep at lambda = 1, pe = 0.2. D is shared.
inline std::vector<SweepPoint> sweep_points(const SweepSettings& s) {
  std::vector<SweepPoint> points;
  switch (s.figure) {
    case Figure::Lambda:
      for (double l : s.grids.lambda) points.push_back({l, {l, 0.2, s.D}, ScDistribution::from_theta(10.0)});
      break;
    case Figure::Pe:
      for (double pe : s.grids.pe) points.push_back({pe, {1.0, pe, s.D}, ScDistribution::from_theta(10.0)});
      break;
    case Figure::VarC:
      for (double th : s.grids.theta) points.push_back({th, {1.0, 0.2, s.D}, ScDistribution::from_theta(th)});
      break;
  }
  return points;
}

inline opt::WRange search_range(const config::SearchConfig& search, const SystemParams& params,
                                const ScDistribution& dist) {
  auto range = opt::WRange::defaults(params, dist);
  if (search.W_lo) range.lo = *search.W_lo;
  if (search.W_hi) range.hi = *search.W_hi;
  return range;
}

// Optimizes one scheme at one parameter point and simulates the winner.
inline SweepResult optimize_scheme(const std::string& scheme, const SystemParams& params,
                                   const ScDistribution& dist, const config::SearchConfig& search,
                                   std::uint64_t n_cycles, std::uint64_t seed, unsigned workers,
                                   const sim::SimOptions& sim_options = {}) {
  const auto range = search_range(search, params, dist);
  const bool fb = scheme.ends_with("-fb");
  const auto feedback = fb ? opt::Feedback::With : opt::Feedback::Without;
  SweepResult row;
  row.scheme = scheme;
  row.n_cycles = n_cycles;
  row.seed = seed;

  if (scheme.starts_with("threshold")) {
    opt::SimSearch s;
    s.W_tol = search.W_tol_sim;
    s.grid_points = search.grid_points;
    s.n_cycles = n_cycles;
    s.seed = seed;
    s.workers = workers;
    s.sim_options = sim_options;
    const auto r = opt::best_threshold_sim(params, dist, feedback, range, s);
    row.best_params = r.best_params;
    row.sim_value = r.value;
    row.sim_stderr = r.std_error;
    return row;
  }

  opt::OptResult r;
  if (scheme.starts_with("window")) {
    r = opt::best_window(params, dist, feedback, range, search.B_max,
                         opt::AnalyticSearch{search.W_tol, search.grid_points, false});
  } else if (scheme.starts_with("prob")) {
    opt::ProbSearch ps;
    ps.W_tol = search.W_tol;
    ps.grid_points = search.grid_points;
    ps.ptx_resolution = search.ptx_resolution;
    r = opt::best_prob(params, dist, feedback, range, ps);
  } else {
    throw Error(ErrorKind::InvalidParam, "unknown scheme '" + scheme + "'");
  }
  row.best_params = r.best_params;
  row.analytic_value = r.value;
  const auto est = sim::simulate_parallel(r.best_params, params, dist, n_cycles, seed, workers, sim_options);
  row.sim_value = est.mean;
  row.sim_stderr = est.std_error;
  return row;
}

// One row per (grid value, scheme), in grid order then kSchemeNames order.
// Jobs run on a bounded pool; each job simulates single-threaded, so the
// output does not depend on the worker count.
inline std::vector<SweepResult> run_sweep(const SweepSettings& s) {
  const auto points = sweep_points(s);
  const std::size_t n_schemes = std::size(kSchemeNames);
  const std::size_t n_jobs = points.size() * n_schemes;
  std::vector<SweepResult> rows(n_jobs);
  std::vector<std::exception_ptr> failures(n_jobs);
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t j = next++; j < n_jobs; j = next++) {
      const auto& pt = points[j / n_schemes];
      try {
        rows[j] = optimize_scheme(kSchemeNames[j % n_schemes], pt.params, pt.dist, s.search,
                                  s.n_cycles, s.seed, 1, s.sim_options);
        rows[j].sweep_var = sweep_variable(s.figure);
        rows[j].sweep_value = pt.value;
      } catch (...) {
        failures[j] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto n_threads = std::max<std::size_t>(1, std::min<std::size_t>(s.workers, n_jobs));
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return rows;
}

}  // namespace aoi::sweep
