// aoi: evaluate, optimize and sweep retransmission policies for an
// energy-harvesting status-update node.
//
//   aoi eval     --config cfg.json [--scheme S --W w --B b --ptx p ...]
//   aoi optimize --scheme S [--config cfg.json] [-v]
//   aoi sweep    --figure lambda|pe|varc --out rows.csv [--config cfg.json]

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "aoi/aoi.hpp"

namespace {

using namespace aoi;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDisagree = 2;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> cycles;
  std::optional<unsigned> workers;
  std::optional<double> lambda, pe, D, theta, W, pTx;
  std::optional<int> B;
  std::optional<std::string> scheme;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--cycles", cycles, "measured delivery cycles per simulation")->check(CLI::PositiveNumber);
    cmd->add_option("--workers", workers, "worker threads (default: $AOI_WORKERS or all cores)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--lambda", lambda, "energy arrival rate");
    cmd->add_option("--pe", pe, "erasure probability");
    cmd->add_option("--D", D, "transmission time");
    cmd->add_option("--theta", theta, "S/C law parameter: m1=1, m2=10+theta, p2=4/(9+theta)");
    cmd->add_option("--W", W, "age threshold (use inf for unbounded)");
    cmd->add_option("--B", B, "transmission attempts per committed update");
    cmd->add_option("--ptx", pTx, "transmission probability");
  }

  config::RunConfig resolve() const {
    config::RunConfig cfg = config_path.empty() ? config::RunConfig{} : config::load(config_path);
    if (seed) cfg.sim.seed = *seed;
    if (cycles) cfg.sim.cycles = *cycles;
    if (workers) cfg.sim.workers = *workers;
    if (lambda) cfg.params.lambda = *lambda;
    if (pe) cfg.params.pe = *pe;
    if (D) cfg.params.D = *D;
    if (theta) {
      cfg.theta = *theta;
      cfg.dist = ScDistribution::from_theta(*theta);
    }
    if (scheme) cfg.policy.scheme = *scheme;
    if (W) cfg.policy.W = *W;
    if (B) cfg.policy.B = *B;
    if (pTx) cfg.policy.pTx = *pTx;
    return cfg;
  }
};

unsigned workers_of(const config::RunConfig& cfg) {
  return cfg.sim.workers ? *cfg.sim.workers : sim::default_workers();
}

void print_setup(const config::RunConfig& cfg) {
  std::cout << "lambda=" << sweep::format_number(cfg.params.lambda)
            << " pe=" << sweep::format_number(cfg.params.pe)
            << " D=" << sweep::format_number(cfg.params.D);
  if (cfg.theta) {
    std::cout << " theta=" << sweep::format_number(*cfg.theta);
  } else if (cfg.dist.is_two_point()) {
    std::cout << " m1=" << sweep::format_number(cfg.dist.m1())
              << " m2=" << sweep::format_number(cfg.dist.m2())
              << " p2=" << sweep::format_number(cfg.dist.p2());
  } else {
    std::cout << " dist=empirical(" << cfg.dist.samples().size() << " samples)";
  }
  std::cout << '\n';
}

std::string describe(const PolicySpec& policy) {
  std::string s = scheme_name(policy) + " W=" + sweep::format_number(threshold_of(policy));
  std::visit(
      [&](const auto& p) {
        if constexpr (requires { p.B; }) s += " B=" + std::to_string(p.B);
        if constexpr (requires { p.pTx; }) s += " pTx=" + sweep::format_number(p.pTx);
      },
      policy);
  return s;
}

void write_rows(const std::string& path, const std::vector<sweep::SweepResult>& rows) {
  const std::string partial = path + ".partial";
  {
    std::ofstream out(partial);
    if (!out) throw Error(ErrorKind::InvalidParam, "--out: cannot write " + path);
    sweep::write_csv(out, rows);
    if (!out) {
      std::filesystem::remove(partial);
      throw Error(ErrorKind::InvalidParam, "--out: write failed for " + path);
    }
  }
  std::filesystem::rename(partial, path);
}

int cmd_eval(const Overrides& o, const std::string& trace_path, const std::string& csv_path) {
  const auto cfg = o.resolve();
  const PolicySpec policy = cfg.policy.spec();
  require_valid(cfg.params, cfg.dist, policy);
  print_setup(cfg);
  std::cout << "policy: " << describe(policy) << '\n';

  std::optional<double> closed;
  if (analytic::has_closed_form(policy) && cfg.dist.is_two_point()) {
    closed = analytic::peak_aoi(cfg.params, cfg.dist, policy);
  }

  sim::SimOptions options{cfg.sim.event_budget};
  sim::PeakAoiEstimate est;
  if (!trace_path.empty()) {
    std::ofstream trace(trace_path);
    if (!trace) throw Error(ErrorKind::InvalidParam, "--trace: cannot write " + trace_path);
    sim::Observer observer;
    observer.on_cycle = [&](const sim::CycleRecord& r) {
      trace << std::to_string(r.index) << ',' << sweep::format_number(r.Y) << ','
            << sweep::format_number(r.S) << ',' << std::to_string(r.n_generations) << ','
            << std::to_string(r.n_transmissions) << ',' << sweep::format_number(r.t_ext) << '\n';
    };
    est = sim::simulate(policy, cfg.params, cfg.dist, cfg.sim.cycles, cfg.sim.seed, options, &observer);
  } else {
    est = sim::simulate_parallel(policy, cfg.params, cfg.dist, cfg.sim.cycles, cfg.sim.seed,
                                 workers_of(cfg), options);
  }

  std::printf("analytic:  %s\n",
              closed ? sweep::format_number(*closed).c_str()
                     : (analytic::has_closed_form(policy) ? "n/a (empirical S/C law)"
                                                          : "n/a (simulation-only)"));
  std::printf("simulated: %.6f +- %.6f  (%llu cycles, seed %llu)\n", est.mean, est.std_error,
              static_cast<unsigned long long>(est.n_cycles),
              static_cast<unsigned long long>(est.seed));

  sweep::SweepResult row;
  row.sweep_var = "none";
  row.scheme = scheme_name(policy);
  row.best_params = policy;
  row.analytic_value = closed;
  row.sim_value = est.mean;
  row.sim_stderr = est.std_error;
  row.n_cycles = est.n_cycles;
  row.seed = est.seed;
  const std::string verdict = row.verdict();
  std::printf("verdict:   %s\n", verdict.c_str());
  if (!csv_path.empty()) write_rows(csv_path, {row});
  return verdict == "MISMATCH" ? kExitDisagree : kExitOk;
}

int cmd_optimize(const Overrides& o, bool verbose, const std::string& csv_path) {
  const auto cfg = o.resolve();
  const std::string scheme = cfg.policy.scheme;
  make_policy(scheme, 2.0, 1, 0.5);  // rejects unknown names
  print_setup(cfg);

  const auto range = sweep::search_range(cfg.search, cfg.params, cfg.dist);
  const auto feedback = scheme.ends_with("-fb") ? opt::Feedback::With : opt::Feedback::Without;
  const sim::SimOptions sim_options{cfg.sim.event_budget};
  opt::OptResult result;
  std::optional<double> analytic_value;
  if (scheme.starts_with("threshold")) {
    opt::SimSearch s;
    s.W_tol = cfg.search.W_tol_sim;
    s.grid_points = cfg.search.grid_points;
    s.n_cycles = cfg.sim.cycles;
    s.seed = cfg.sim.seed;
    s.workers = workers_of(cfg);
    s.sim_options = sim_options;
    s.keep_trace = verbose;
    result = opt::best_threshold_sim(cfg.params, cfg.dist, feedback, range, s);
  } else if (scheme.starts_with("window")) {
    result = opt::best_window(cfg.params, cfg.dist, feedback, range, cfg.search.B_max,
                              opt::AnalyticSearch{cfg.search.W_tol, cfg.search.grid_points, verbose});
    analytic_value = result.value;
  } else {
    opt::ProbSearch ps;
    ps.W_tol = cfg.search.W_tol;
    ps.grid_points = cfg.search.grid_points;
    ps.ptx_resolution = cfg.search.ptx_resolution;
    ps.keep_trace = verbose;
    result = opt::best_prob(cfg.params, cfg.dist, feedback, range, ps);
    analytic_value = result.value;
  }

  if (verbose) {
    for (const auto& t : result.search_trace) {
      std::cout << "  trace " << describe(t.params) << " -> " << sweep::format_number(t.value) << '\n';
    }
  }
  std::cout << "best: " << describe(result.best_params) << '\n';
  std::printf("value: %.6f", result.value);
  if (!analytic_value) std::printf(" +- %.6f", result.std_error);
  std::printf("  (%llu evaluations)\n", static_cast<unsigned long long>(result.evaluations));

  if (std::holds_alternative<ThresholdFb>(result.best_params)) {
    const double residual = opt::theorem1_residual(cfg.params, result);
    const double bound = 3.0 * result.std_error + cfg.search.W_tol_sim;
    std::printf("optimal-value identity at W*: %.6f, residual %.6f (bound %.6f) %s\n",
                analytic::theorem1_optimal_value(cfg.params, threshold_of(result.best_params)),
                residual, bound, residual <= bound ? "PASS" : "FAIL");
  }

  if (!csv_path.empty()) {
    sweep::SweepResult row;
    row.sweep_var = "none";
    row.scheme = scheme;
    row.best_params = result.best_params;
    row.analytic_value = analytic_value;
    if (analytic_value) {
      const auto est = sim::simulate_parallel(result.best_params, cfg.params, cfg.dist, cfg.sim.cycles,
                                              cfg.sim.seed, workers_of(cfg), sim_options);
      row.sim_value = est.mean;
      row.sim_stderr = est.std_error;
    } else {
      row.sim_value = result.value;
      row.sim_stderr = result.std_error;
    }
    row.n_cycles = cfg.sim.cycles;
    row.seed = cfg.sim.seed;
    write_rows(csv_path, {row});
  }
  return kExitOk;
}

int cmd_sweep(const Overrides& o, const std::string& figure, const std::string& out_path) {
  const auto cfg = o.resolve();
  sweep::SweepSettings s;
  s.figure = sweep::parse_figure(figure);
  s.grids = cfg.sweep;
  s.D = cfg.params.D;
  s.n_cycles = cfg.sim.cycles;
  s.seed = cfg.sim.seed;
  s.workers = workers_of(cfg);
  s.search = cfg.search;
  s.sim_options = sim::SimOptions{cfg.sim.event_budget};
  const auto rows = sweep::run_sweep(s);
  write_rows(out_path, rows);
  std::size_t mismatches = 0;
  for (const auto& r : rows) mismatches += r.verdict() == "MISMATCH";
  std::cout << "wrote " << rows.size() << " rows to " << out_path << " (" << mismatches
            << " analytic/simulation mismatches)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Peak age-of-information evaluation for energy-harvesting retransmission policies"};
  app.require_subcommand(1);

  Overrides eval_opts, optimize_opts, sweep_opts;
  std::string trace_path, eval_csv, optimize_csv, figure, out_path;
  bool verbose = false;

  auto* eval = app.add_subcommand("eval", "closed form (when available) vs simulation for one policy");
  eval_opts.attach(eval);
  eval->add_option("--scheme", eval_opts.scheme, "policy scheme");
  eval->add_option("--trace", trace_path, "write per-cycle records cycle_index,Y,S,n_generations,n_transmissions,t_ext");
  eval->add_option("--out", eval_csv, "also write the result as a CSV row");

  auto* optimize = app.add_subcommand("optimize", "search the parameters of one scheme");
  optimize_opts.attach(optimize);
  optimize->add_option("--scheme", optimize_opts.scheme, "policy scheme")->required();
  optimize->add_flag("-v,--verbose", verbose, "print the search trace");
  optimize->add_option("--out", optimize_csv, "also write the optimum as a CSV row");

  auto* sweep_cmd = app.add_subcommand("sweep", "optimize all six schemes along a parameter grid");
  sweep_opts.attach(sweep_cmd);
  sweep_cmd->add_option("--figure", figure, "lambda | pe | varc")
      ->required()
      ->check(CLI::IsMember({"lambda", "pe", "varc"}));
  sweep_cmd->add_option("--out", out_path, "CSV output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*eval) return cmd_eval(eval_opts, trace_path, eval_csv);
    if (*optimize) return cmd_optimize(optimize_opts, verbose, optimize_csv);
    if (*sweep_cmd) return cmd_sweep(sweep_opts, figure, out_path);
  } catch (const aoi::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
