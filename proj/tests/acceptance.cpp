// Acceptance criteria. Usage: acceptance [N ...]; with no arguments every
// criterion runs. Prints one PASS/FAIL line per criterion and exits non-zero
// if any failed.

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "aoi/aoi.hpp"

using namespace aoi;

namespace {

constexpr std::uint64_t kSeed = 42;
constexpr std::uint64_t kCycles = 1'000'000;
const ScDistribution kTheta10 = ScDistribution::from_theta(10);

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Hand-derived anchors.
Outcome anchors() {
  using namespace analytic;
  Outcome o;
  const ScDistribution& d = kTheta10;
  const struct {
    const char* name;
    double got, want;
  } cases[] = {
      {"window_fb pe=0 B=1", peak_aoi_window_fb({1, 0.0, 1}, d, kUnbounded, 1), 15.0},
      {"window_fb pe=0.5 B=2", peak_aoi_window_fb({1, 0.5, 1}, d, kUnbounded, 2), 59.0 / 3.0},
      {"prob_fb pe=0.5 pTx=1", peak_aoi_prob_fb({1, 0.5, 1}, d, kUnbounded, 1.0), 19.0},
      {"window_nofb pe=0 B=2", peak_aoi_window_nofb({1, 0.0, 1}, d, kUnbounded, 2), 17.0},
      {"prob_nofb pe=0 pTx=0.5", peak_aoi_prob_nofb({1, 0.0, 1}, d, kUnbounded, 0.5), 23.0},
  };
  double worst = 0.0;
  for (const auto& c : cases) {
    const double rel = std::abs(c.got - c.want) / c.want;
    worst = std::max(worst, rel);
    o.check(rel <= 1e-9, fmt("%s = %.12g, want %.12g", c.name, c.got, c.want));
  }
  if (o.pass) o.detail = fmt("5 anchors, worst relative error %.2e", worst);
  return o;
}

// 2. Closed form vs simulation on the documented grid.
Outcome equivalence() {
  Outcome o;
  const PolicySpec policies[] = {WindowFb{8, 3}, WindowNoFb{8, 3}, ProbFb{8, 0.6}, ProbNoFb{8, 0.6}};
  int points = 0;
  double worst_ratio = 0.0;
  for (double lambda : {0.5, 1.0, 2.0}) {
    for (double pe : {0.2, 0.5}) {
      const SystemParams p{lambda, pe, 1.0};
      for (const auto& pol : policies) {
        const double an = *analytic::peak_aoi(p, kTheta10, pol);
        const auto est = sim::simulate_parallel(pol, p, kTheta10, kCycles, kSeed, sim::default_workers());
        const double tol = std::max(3.0 * est.std_error, 0.005 * an);
        const double gap = std::abs(est.mean - an);
        worst_ratio = std::max(worst_ratio, gap / tol);
        ++points;
        o.check(gap <= tol, fmt("%s lambda=%g pe=%g: sim %.5f +- %.5f vs analytic %.5f",
                                scheme_name(pol).c_str(), lambda, pe, est.mean, est.std_error, an));
      }
    }
  }
  if (o.pass) o.detail = fmt("%d points, worst |sim-analytic|/tolerance = %.3f", points, worst_ratio);
  return o;
}

// 3. Optimal-value identity at the simulated threshold optimum.
Outcome theorem1() {
  Outcome o;
  std::string summary;
  for (double pe : {0.2, 0.5}) {
    const SystemParams p{1.0, pe, 1.0};
    opt::SimSearch s;
    s.n_cycles = kCycles;
    s.seed = kSeed;
    s.W_tol = 0.05;
    s.workers = sim::default_workers();
    const auto r = opt::best_threshold_sim(p, kTheta10, opt::Feedback::With, opt::WRange::defaults(p, kTheta10), s);
    const double W = threshold_of(r.best_params);
    const double residual = opt::theorem1_residual(p, r);
    const double bound = 3.0 * r.std_error + s.W_tol;
    const auto line = fmt("pe=%g: W*=%.4f value=%.5f+-%.5f identity=%.5f residual=%.4f bound=%.4f", pe,
                          W, r.value, r.std_error, analytic::theorem1_optimal_value(p, W), residual, bound);
    summary += (summary.empty() ? "" : "; ") + line;
    o.check(residual <= bound, line);
  }
  o.detail = summary;
  return o;
}

const double kGridLambda[] = {0.5, 1.0, 2.0};
const double kGridPe[] = {0.0, 0.3, 0.7};

// 4. B = 1 feedback and no-feedback windows coincide.
Outcome single_attempt() {
  Outcome o;
  double worst = 0.0;
  for (double lambda : kGridLambda) {
    for (double pe : kGridPe) {
      for (double W : {3.0, 8.0, kUnbounded}) {
        const SystemParams p{lambda, pe, 1.0};
        const double fb = analytic::peak_aoi_window_fb(p, kTheta10, W, 1);
        const double nofb = analytic::peak_aoi_window_nofb(p, kTheta10, W, 1);
        const double rel = std::abs(fb - nofb) / fb;
        worst = std::max(worst, rel);
        o.check(rel <= 1e-12, fmt("lambda=%g pe=%g W=%g: %.15g vs %.15g", lambda, pe, W, fb, nofb));
      }
    }
  }
  if (o.pass) o.detail = fmt("3x3 grid x 3 thresholds, worst relative gap %.2e", worst);
  return o;
}

// 5. Probabilistic no-feedback minus feedback is the geometric T_ext mean.
Outcome extension_identity() {
  Outcome o;
  double worst = 0.0;
  for (double lambda : kGridLambda) {
    for (double pe : kGridPe) {
      for (double ptx : {0.1, 0.6, 0.95}) {
        const SystemParams p{lambda, pe, 1.0};
        const double diff = analytic::peak_aoi_prob_nofb(p, kTheta10, 8.0, ptx) -
                            analytic::peak_aoi_prob_fb(p, kTheta10, 8.0, ptx);
        const double want = (p.D + 1.0 / lambda) * ptx / (1.0 - ptx);
        const double rel = std::abs(diff - want) / want;
        worst = std::max(worst, rel);
        o.check(rel <= 1e-12, fmt("lambda=%g pe=%g pTx=%g: %.15g vs %.15g", lambda, pe, ptx, diff, want));
      }
    }
  }
  if (o.pass) o.detail = fmt("3x3 grid x 3 pTx, worst relative gap %.2e", worst);
  return o;
}

// 6. Scheme ordering on the default lambda sweep.
Outcome ordering() {
  Outcome o;
  sweep::SweepSettings s;
  s.figure = sweep::Figure::Lambda;
  s.n_cycles = kCycles;
  s.seed = kSeed;
  s.workers = 8;
  const auto rows = sweep::run_sweep(s);
  auto find = [&](double value, const std::string& scheme) -> const sweep::SweepResult& {
    for (const auto& r : rows) {
      if (r.sweep_value == value && r.scheme == scheme) return r;
    }
    throw std::runtime_error("missing row " + scheme);
  };
  // Optimized objective: closed form where it exists, else the simulated search value.
  auto value = [](const sweep::SweepResult& r) { return r.analytic_value ? *r.analytic_value : r.sim_value; };
  double min_margin_a = 1e300, min_margin_b = 1e300;
  for (double lambda : s.grids.lambda) {
    const auto& tf = find(lambda, "threshold-fb");
    const auto& wf = find(lambda, "window-fb");
    const auto& pf = find(lambda, "prob-fb");
    const auto& tn = find(lambda, "threshold-nofb");
    const auto& wn = find(lambda, "window-nofb");
    const auto& pn = find(lambda, "prob-nofb");
    const double slack = 3.0 * tf.sim_stderr;
    const double margin_a = std::min(value(wf), value(pf)) + slack - value(tf);
    const double margin_b = value(pn) - std::max(value(wn), value(tn));
    min_margin_a = std::min(min_margin_a, margin_a);
    min_margin_b = std::min(min_margin_b, margin_b);
    o.check(margin_a >= 0.0, fmt("(a) lambda=%g: threshold-fb %.5f vs window-fb %.5f, prob-fb %.5f (+%.5f)",
                                 lambda, value(tf), value(wf), value(pf), slack));
    o.check(margin_b >= 0.0, fmt("(b) lambda=%g: prob-nofb %.5f vs window-nofb %.5f, threshold-nofb %.5f",
                                 lambda, value(pn), value(wn), value(tn)));
  }
  if (o.pass) {
    o.detail = fmt("%zu lambda points; smallest margins (a) %.4f, (b) %.4f", s.grids.lambda.size(),
                   min_margin_a, min_margin_b);
  }
  return o;
}

// 7. Distributional checks.
Outcome distributions() {
  Outcome o;
  // trunc_geom sums to one.
  double worst_sum = 0.0;
  for (double pe : {0.0, 0.05, 0.2, 0.5, 0.8, 0.95}) {
    for (int B = 1; B <= 30; ++B) {
      double total = analytic::trunc_geom_pmf(pe, B, analytic::AttemptOutcome::failed(B));
      for (int v = 1; v <= B; ++v) total += analytic::trunc_geom_pmf(pe, B, analytic::AttemptOutcome::success_at(v));
      worst_sum = std::max(worst_sum, std::abs(total - 1.0));
    }
  }
  o.check(worst_sum <= 1e-12, fmt("trunc_geom sum off by %.2e", worst_sum));

  // Attempt counts of committed window updates, chi-square on 10^6 updates.
  const double pe = 0.4;
  const int B = 4;
  const SystemParams p{1.0, pe, 1.0};
  std::vector<double> observed(B + 1, 0.0);
  long committed = 0;
  std::vector<double> ages;
  ages.reserve(kCycles);
  double gen_sum = 0.0;
  struct Acc {
    double s = 0, s2 = 0;
    long n = 0;
    void push(double x) { s += x, s2 += x * x, ++n; }
    double mean() const { return s / n; }
    double se() const { return std::sqrt((s2 / n - mean() * mean()) / (n - 1)); }
  } cycle_sum, generations, durations;

  sim::Observer obs;
  obs.on_generation = [&](const sim::GenerationRecord& g) {
    gen_sum += g.duration;
    if (ages.size() < kCycles) ages.push_back(g.initial_age);
    if (!g.gate_passed || committed >= static_cast<long>(kCycles)) return;
    ++committed;
    observed[g.delivered ? g.attempts - 1 : B] += 1.0;
  };
  obs.on_cycle = [&](const sim::CycleRecord& r) {
    cycle_sum.push(gen_sum);
    generations.push(r.n_generations);
    gen_sum = 0.0;
  };
  sim::simulate(WindowFb{8, B}, p, kTheta10, 2 * kCycles, kSeed, {}, &obs);
  o.check(committed == static_cast<long>(kCycles), fmt("only %ld committed updates", committed));
  double chi2 = 0.0;
  for (int v = 0; v <= B; ++v) {
    const auto outcome =
        v < B ? analytic::AttemptOutcome::success_at(v + 1) : analytic::AttemptOutcome::failed(B);
    const double expected = committed * analytic::trunc_geom_pmf(pe, B, outcome);
    chi2 += (observed[v] - expected) * (observed[v] - expected) / expected;
  }
  const double p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(B), chi2));
  o.check(p_value > 1e-3, fmt("attempt-count chi-square %.3f, p=%.2e", chi2, p_value));

  // Initial-age ECDF against m_cdf on 10^6 generations.
  std::sort(ages.begin(), ages.end());
  const analytic::MDistribution md(kTheta10, p.lambda);
  const double n = static_cast<double>(ages.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < ages.size(); ++i) {
    const double f = md.cdf(ages[i]);
    sup = std::max({sup, std::abs((i + 1) / n - f), std::abs(i / n - f)});
  }
  o.check(ages.size() == kCycles && sup <= 0.005, fmt("ECDF sup-deviation %.5f over %zu ages", sup, ages.size()));

  // Wald: E[sum of A_k] = E[n] E[A], with E[A] from an independent run.
  sim::Observer obs2;
  obs2.on_generation = [&](const sim::GenerationRecord& g) { durations.push(g.duration); };
  sim::simulate(WindowFb{8, B}, p, kTheta10, kCycles, kSeed + 1, {}, &obs2);
  const double product = generations.mean() * durations.mean();
  const double se_product =
      std::hypot(durations.mean() * generations.se(), generations.mean() * durations.se());
  const double combined = std::hypot(cycle_sum.se(), se_product);
  const double wald_gap = std::abs(cycle_sum.mean() - product);
  o.check(wald_gap <= 3.0 * combined,
          fmt("Wald %.5f vs %.5f, combined stderr %.5f", cycle_sum.mean(), product, combined));

  if (o.pass) {
    o.detail = fmt("pmf sum err %.1e; chi2=%.2f (p=%.3f); ECDF sup %.5f; Wald gap %.2f stderr", worst_sum,
                   chi2, p_value, sup, wald_gap / combined);
  }
  return o;
}

// 8. Determinism, including across worker counts.
Outcome determinism() {
  Outcome o;
  const SystemParams p{1.0, 0.2, 1.0};
  const PolicySpec policies[] = {ThresholdFb{10}, WindowFb{8, 3}, ProbFb{8, 0.6},
                                 ThresholdNoFb{10}, WindowNoFb{8, 3}, ProbNoFb{8, 0.6}};
  for (const auto& pol : policies) {
    const auto a = sim::simulate(pol, p, kTheta10, kCycles, kSeed);
    const auto b = sim::simulate(pol, p, kTheta10, kCycles, kSeed);
    const auto w1 = sim::simulate_parallel(pol, p, kTheta10, kCycles, kSeed, 1);
    const auto w8 = sim::simulate_parallel(pol, p, kTheta10, kCycles, kSeed, 8);
    o.check(a == b && a == w1 && a == w8, "simulate differs for " + scheme_name(pol));
  }
  auto csv = [](unsigned workers) {
    sweep::SweepSettings s;
    s.figure = sweep::Figure::Pe;
    s.grids.pe = {0.1, 0.4, 0.7};
    s.n_cycles = 100'000;
    s.seed = kSeed;
    s.workers = workers;
    std::ostringstream out;
    sweep::write_csv(out, sweep::run_sweep(s));
    return out.str();
  };
  const auto one = csv(1);
  o.check(one == csv(8), "sweep CSV differs between 1 and 8 workers");
  o.check(one == csv(1), "sweep CSV differs between repeated runs");
  if (o.pass) o.detail = "6 schemes x (repeat, 1 vs 8 workers) bit-identical; pe sweep CSV identical";
  return o;
}

const std::function<Outcome()> kCriteria[] = {anchors,   equivalence,  theorem1,      single_attempt,
                                              extension_identity, ordering, distributions, determinism};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty()) {
    for (int i = 1; i <= 8; ++i) selected.push_back(i);
  }
  int failures = 0;
  for (int id : selected) {
    if (id < 1 || id > 8) {
      std::printf("FAIL criterion %d: no such criterion\n", id);
      ++failures;
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = kCriteria[id - 1]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %d: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
