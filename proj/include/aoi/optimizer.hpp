#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "aoi/analytic.hpp"
#include "aoi/error.hpp"
#include "aoi/model.hpp"
#include "aoi/simulator.hpp"

namespace aoi::opt {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Feedback { With, Without };

struct TracePoint {
  PolicySpec params;
  double value;
};

struct OptResult {
  PolicySpec best_params;
  double value = kInf;
  double std_error = 0.0;  // 0 for closed-form objectives
  std::uint64_t evaluations = 0;
  std::vector<TracePoint> search_trace;
};

struct ScalarMin {
  double x = 0.0;
  double f = kInf;
  std::uint64_t evaluations = 0;
  std::vector<std::pair<double, double>> trace;
};

struct ScalarOptions {
  int grid_points = 64;
};

// Strict order on candidates: lower value wins, ties go to the smaller argument.
inline bool better(double f, double x, double best_f, double best_x) noexcept {
  if (f < best_f) return true;
  return f == best_f && x < best_x;
}

// Coarse grid scan followed by golden-section refinement inside the cell
// around the best grid point. Returns the best point evaluated overall.
// The objective may return +inf where it is undefined.
inline ScalarMin minimize_scalar(const std::function<double(double)>& objective, double lo,
                                 double hi, double tol, const ScalarOptions& options = {}) {
  if (!(lo < hi)) throw Error(ErrorKind::InvalidParam, "minimize_scalar needs lo < hi");
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidParam, "minimize_scalar needs tol > 0");
  if (options.grid_points < 3) throw Error(ErrorKind::InvalidParam, "grid needs >= 3 points");

  ScalarMin out;
  auto eval = [&](double x) {
    double f = objective(x);
    if (std::isnan(f)) f = kInf;
    ++out.evaluations;
    out.trace.emplace_back(x, f);
    if (better(f, x, out.f, out.x)) {
      out.f = f;
      out.x = x;
    }
    return f;
  };

  const int n = options.grid_points;
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = i == n - 1 ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  int best = -1;
  double best_f = kInf;
  for (int i = 0; i < n; ++i) {
    const double f = eval(xs[i]);
    if (best < 0 ? f < kInf : better(f, xs[i], best_f, xs[best])) {
      best = i;
      best_f = f;
    }
  }
  if (best < 0) throw Error(ErrorKind::NoFiniteValue, "objective is +inf on the whole grid");

  double a = xs[std::max(best - 1, 0)];
  double b = xs[std::min(best + 1, n - 1)];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = eval(c);
  double fd = eval(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = eval(d);
    }
  }
  return out;
}

// Search range for thresholds.
struct WRange {
  double lo = 0.0;
  double hi = 0.0;

  // (min S/C time, m2 + 20/lambda + 10 D]; beyond hi the gate passes with
  // probability > 1 - 1e-8.
  static WRange defaults(const SystemParams& params, const ScDistribution& dist) {
    return {dist.min_support(), dist.m2() + 20.0 / params.lambda + 10.0 * params.D};
  }
};

struct AnalyticSearch {
  double W_tol = 1e-6;
  int grid_points = 64;
  bool keep_trace = false;
};

namespace detail {

// Closed-form objective with dead or degenerate gates mapped to +inf.
inline double closed_form_or_inf(const SystemParams& params, const ScDistribution& dist,
                                 const PolicySpec& policy) {
  try {
    const double v = *analytic::peak_aoi(params, dist, policy);
    return std::isfinite(v) ? v : kInf;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::GateNeverPasses || e.kind() == ErrorKind::DeadPolicy) return kInf;
    throw;
  }
}

inline void append_trace(OptResult& r, const ScalarMin& m,
                         const std::function<PolicySpec(double)>& make) {
  for (const auto& [x, f] : m.trace) r.search_trace.push_back({make(x), f});
}

}  // namespace detail

// Best window scheme: for every B in 1..B_max, the best W; ties prefer smaller W then smaller B.
inline OptResult best_window(const SystemParams& params, const ScDistribution& dist,
                             Feedback scheme, WRange range, int B_max,
                             const AnalyticSearch& search = {}) {
  if (B_max < 1) throw Error(ErrorKind::InvalidParam, "B_max must be >= 1");
  auto make = [scheme](double W, int B) -> PolicySpec {
    if (scheme == Feedback::With) return WindowFb{W, B};
    return WindowNoFb{W, B};
  };
  OptResult result;
  result.best_params = make(range.hi, 1);
  double best_W = kInf;
  for (int B = 1; B <= B_max; ++B) {
    auto objective = [&](double W) { return detail::closed_form_or_inf(params, dist, make(W, B)); };
    const auto m = minimize_scalar(objective, range.lo, range.hi, search.W_tol,
                                   ScalarOptions{search.grid_points});
    result.evaluations += m.evaluations;
    if (search.keep_trace) {
      detail::append_trace(result, m, [&](double W) { return make(W, B); });
    }
    if (better(m.f, m.x, result.value, best_W)) {
      result.value = m.f;
      best_W = m.x;
      result.best_params = make(m.x, B);
    }
  }
  return result;
}

struct ProbSearch : AnalyticSearch {
  int ptx_resolution = 16;
  double ptx_tol = 1e-5;
};

// Best probabilistic scheme: pTx grid, inner search over W, then one
// refinement of pTx around the best cell.
inline OptResult best_prob(const SystemParams& params, const ScDistribution& dist, Feedback scheme,
                           WRange range, const ProbSearch& search = {}) {
  const int res = search.ptx_resolution;
  if (res < 8) throw Error(ErrorKind::InvalidParam, "pTx grid resolution must be >= 8");
  const bool fb = scheme == Feedback::With;
  auto make = [fb](double W, double pTx) -> PolicySpec {
    if (fb) return ProbFb{W, pTx};
    return ProbNoFb{W, pTx};
  };

  OptResult result;
  double best_W = kInf;
  double best_ptx = kInf;
  auto inner = [&](double pTx) {
    auto objective = [&](double W) { return detail::closed_form_or_inf(params, dist, make(W, pTx)); };
    const auto m = minimize_scalar(objective, range.lo, range.hi, search.W_tol,
                                   ScalarOptions{search.grid_points});
    result.evaluations += m.evaluations;
    if (search.keep_trace) {
      detail::append_trace(result, m, [&](double W) { return make(W, pTx); });
    }
    const bool wins = m.f < result.value ||
                      (m.f == result.value && (m.x < best_W || (m.x == best_W && pTx < best_ptx)));
    if (wins) {
      result.value = m.f;
      best_W = m.x;
      best_ptx = pTx;
      result.best_params = make(m.x, pTx);
    }
    return m.f;
  };

  // fb: k/res for k = 1..res; nofb: k/(res+1) for k = 1..res.
  const double step = fb ? 1.0 / res : 1.0 / (res + 1);
  int best_k = 0;
  double best_f = kInf;
  for (int k = 1; k <= res; ++k) {
    const double f = inner(k * step);
    if (f < best_f) {
      best_f = f;
      best_k = k;
    }
  }
  if (best_k == 0) throw Error(ErrorKind::NoFiniteValue, "no finite value on the pTx grid");

  const double edge = 1e-9;
  const double lo = std::max((best_k - 1) * step, edge);
  const double hi = fb ? std::min((best_k + 1) * step, 1.0) : std::min((best_k + 1) * step, 1.0 - edge);
  minimize_scalar(inner, lo, hi, search.ptx_tol, ScalarOptions{16});
  return result;
}

struct SimSearch {
  double W_tol = 0.05;
  int grid_points = 64;
  std::uint64_t n_cycles = 1'000'000;
  std::uint64_t seed = 42;
  unsigned workers = 1;
  sim::SimOptions sim_options{};
  bool keep_trace = false;
};

// Best threshold by simulation. Every W is simulated with the same seed, so
// the objective is a deterministic function of W (common random numbers).
inline OptResult best_threshold_sim(const SystemParams& params, const ScDistribution& dist,
                                    Feedback scheme, WRange range, const SimSearch& search = {}) {
  const bool fb = scheme == Feedback::With;
  auto make = [fb](double W) -> PolicySpec {
    if (fb) return ThresholdFb{W};
    return ThresholdNoFb{W};
  };
  if (auto e = validate(params, dist, make(range.hi))) throw *e;

  std::map<double, sim::PeakAoiEstimate> seen;
  auto objective = [&](double W) {
    const PolicySpec policy = make(W);
    if (validate(params, dist, policy)) return kInf;
    if (auto it = seen.find(W); it != seen.end()) return it->second.mean;
    try {
      const auto est = sim::simulate_parallel(policy, params, dist, search.n_cycles, search.seed,
                                              search.workers, search.sim_options);
      seen.emplace(W, est);
      return est.mean;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::CycleOverflow) return kInf;
      throw;
    }
  };
  const auto m = minimize_scalar(objective, range.lo, range.hi, search.W_tol,
                                 ScalarOptions{search.grid_points});
  OptResult result;
  result.best_params = make(m.x);
  result.value = m.f;
  result.std_error = seen.at(m.x).std_error;
  result.evaluations = m.evaluations;
  if (search.keep_trace) detail::append_trace(result, m, make);
  return result;
}

// Distance between an optimized threshold-with-feedback value and the
// optimal-value identity evaluated at its threshold.
inline double theorem1_residual(const SystemParams& params, const OptResult& opt) {
  const auto* policy = std::get_if<ThresholdFb>(&opt.best_params);
  if (!policy) {
    throw Error(ErrorKind::InvalidParam, "theorem1_residual needs a threshold-fb optimum");
  }
  return std::abs(opt.value - analytic::theorem1_optimal_value(params, policy->W));
}

}  // namespace aoi::opt
