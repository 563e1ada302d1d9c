#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "aoi/error.hpp"
#include "aoi/model.hpp"
#include "aoi/rng.hpp"

// Renewal-cycle Monte-Carlo engine.
//
// A cycle runs from one first-successful delivery to the next. Time inside a
// cycle is accumulated as local durations only, so results do not depend on
// where a cycle sits on an absolute clock:
//
//   pre_i  : S/C start of the cycle's first update .. its delivery instant
//   post_i : delivery .. the S/C start that opens cycle i+1 (recharge I0 plus,
//            without feedback, the wasted tail of retransmissions)
//   S_i    : age of the delivered update at delivery
//
// so that Y_i = post_{i-1} + pre_i and peak_i = S_{i-1} + Y_i.
namespace aoi::sim {

struct CycleRecord {
  std::uint64_t index = 0;
  double Y = 0.0;
  double S = 0.0;
  std::uint32_t n_generations = 0;
  std::uint32_t n_transmissions = 0;
  double t_ext = 0.0;
};

struct GenerationRecord {
  std::uint64_t cycle = 0;
  std::uint32_t index = 0;  // 1-based within the cycle
  double sc_time = 0.0;
  double initial_age = 0.0;  // C + I at the first decision
  bool gate_passed = false;
  std::uint32_t attempts = 0;  // transmissions of this update, tail included
  bool delivered = false;
  double duration = 0.0;  // A_k: S/C start to abandonment, or to delivery
};

struct PeakAoiEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t n_cycles = 0;
  std::uint64_t seed = 0;
  double mean_Y = 0.0;
  double mean_S = 0.0;

  friend bool operator==(const PeakAoiEstimate&, const PeakAoiEstimate&) = default;
};

struct SimOptions {
  std::uint64_t event_budget = 1'000'000;  // per cycle
};

// Callbacks for the serial engine; records arrive in cycle order.
struct Observer {
  std::function<void(const CycleRecord&)> on_cycle;
  std::function<void(const GenerationRecord&)> on_generation;
};

// Cycles per chunk. The partition depends on n_cycles only, never on the
// worker count, which keeps merged estimates bit-identical.
inline constexpr std::uint64_t kChunkCycles = 16384;

namespace detail {

// Welford accumulator with Chan's pairwise merge.
struct Running {
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) noexcept {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }

  void merge(const Running& other) noexcept {
    if (other.n == 0) return;
    if (n == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(n);
    const double nb = static_cast<double>(other.n);
    const double total = na + nb;
    const double delta = other.mean - mean;
    mean += delta * (nb / total);
    m2 += other.m2 + delta * delta * (na * nb / total);
    n += other.n;
  }

  double variance() const noexcept { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
};

struct ChunkSummary {
  Running peak;
  Running Y;
  Running S;

  void merge(const ChunkSummary& other) noexcept {
    peak.merge(other.peak);
    Y.merge(other.Y);
    S.merge(other.S);
  }
};

enum class Rule { Threshold, Window, Prob };

// Flattened policy for the inner loop.
struct Decider {
  Rule rule = Rule::Threshold;
  bool feedback = true;
  double W = kUnbounded;
  std::uint32_t B = 1;
  double pTx = 1.0;

  static Decider from(const PolicySpec& policy) {
    struct Visitor {
      Decider operator()(const ThresholdFb& p) const { return {Rule::Threshold, true, p.W, 1, 1.0}; }
      Decider operator()(const ThresholdNoFb& p) const {
        return {Rule::Threshold, false, p.W, 1, 1.0};
      }
      Decider operator()(const WindowFb& p) const {
        return {Rule::Window, true, p.W, static_cast<std::uint32_t>(p.B), 1.0};
      }
      Decider operator()(const WindowNoFb& p) const {
        return {Rule::Window, false, p.W, static_cast<std::uint32_t>(p.B), 1.0};
      }
      Decider operator()(const ProbFb& p) const { return {Rule::Prob, true, p.W, 1, p.pTx}; }
      Decider operator()(const ProbNoFb& p) const { return {Rule::Prob, false, p.W, 1, p.pTx}; }
    };
    return std::visit(Visitor{}, policy);
  }

  // Decision at an energy arrival while holding an update of the given age
  // that has been sent `sent` times so far.
  bool transmit(std::uint32_t sent, double age, const rng::CycleStream& stream,
                std::uint32_t generation) const noexcept {
    switch (rule) {
      case Rule::Threshold:
        return age <= W;
      case Rule::Window:
        return sent == 0 ? age <= W : sent < B;
      case Rule::Prob:
        if (sent == 0 && !(age <= W)) return false;
        return stream.uniform(generation, sent + 1, rng::Purpose::Coin) < pTx;
    }
    return false;
  }
};

struct CycleOutcome {
  double pre = 0.0;
  double post = 0.0;
  double S = 0.0;
  double t_ext = 0.0;
  std::uint32_t generations = 0;
  std::uint32_t transmissions = 0;
};

class CycleRunner {
 public:
  CycleRunner(const PolicySpec& policy, const SystemParams& params, const ScDistribution& dist,
              std::uint64_t seed, const SimOptions& options)
      : decider_(Decider::from(policy)),
        params_(params),
        dist_(dist),
        seed_(seed),
        budget_(options.event_budget) {}

  CycleOutcome run(std::uint64_t cycle, const Observer* observer = nullptr) const {
    const rng::CycleStream stream(seed_, cycle);
    const double lambda = params_.lambda;
    const double D = params_.D;
    const double pe = params_.pe;
    std::uint64_t events = 0;
    CycleOutcome out;

    for (std::uint32_t k = 1;; ++k) {
      count_event(events, cycle);
      const double sc = dist_.sample(stream.uniform(k, 0, rng::Purpose::ScTime));
      const double recharge = rng::exponential(stream.uniform(k, 0, rng::Purpose::ScRecharge), lambda);
      double age = sc + recharge;
      double elapsed = age;
      const double initial_age = age;

      std::uint32_t sent = 0;
      bool delivered = false;
      double delivered_at = 0.0;
      double last_recharge = 0.0;
      double ext = 0.0;  // post-delivery activity, final recharge excluded
      for (;;) {
        count_event(events, cycle);
        if (!decider_.transmit(sent, age, stream, k)) break;
        ++sent;
        age += D;
        elapsed += D;
        if (delivered) {
          ext += last_recharge + D;
        } else if (stream.uniform(k, sent, rng::Purpose::Erasure) >= pe) {
          delivered = true;
          out.S = age;
          delivered_at = elapsed;
        }
        last_recharge = rng::exponential(stream.uniform(k, sent, rng::Purpose::TxRecharge), lambda);
        if (delivered && decider_.feedback) {
          elapsed += last_recharge;
          break;
        }
        age += last_recharge;
        elapsed += last_recharge;
      }

      out.generations = k;
      out.transmissions += sent;
      if (observer && observer->on_generation) {
        observer->on_generation(GenerationRecord{cycle, k, sc, initial_age, initial_age <= decider_.W,
                                                 sent, delivered,
                                                 delivered ? delivered_at : elapsed});
      }
      if (delivered) {
        out.pre += delivered_at;
        out.post = elapsed - delivered_at;
        out.t_ext = ext;
        return out;
      }
      out.pre += elapsed;
    }
  }

 private:
  void count_event(std::uint64_t& events, std::uint64_t cycle) const {
    if (++events > budget_) {
      throw Error(ErrorKind::CycleOverflow, "cycle " + std::to_string(cycle) + " exceeded " +
                                                std::to_string(budget_) + " events");
    }
  }

  Decider decider_;
  SystemParams params_;
  ScDistribution dist_;
  std::uint64_t seed_;
  std::uint64_t budget_;
};

// Measured cycles [first, last); cycle first-1 is replayed as warm-up.
inline ChunkSummary run_chunk(const CycleRunner& runner, std::uint64_t first, std::uint64_t last,
                              const Observer* observer) {
  ChunkSummary summary;
  CycleOutcome prev = runner.run(first - 1);
  for (std::uint64_t i = first; i < last; ++i) {
    const CycleOutcome cur = runner.run(i, observer);
    const double Y = prev.post + cur.pre;
    summary.peak.push(prev.S + Y);
    summary.Y.push(Y);
    summary.S.push(prev.S);
    if (observer && observer->on_cycle) {
      observer->on_cycle(
          CycleRecord{i, Y, cur.S, cur.generations, cur.transmissions, cur.t_ext});
    }
    prev = cur;
  }
  return summary;
}

inline std::uint64_t chunk_count(std::uint64_t n_cycles) noexcept {
  return (n_cycles + kChunkCycles - 1) / kChunkCycles;
}

inline PeakAoiEstimate finish(const ChunkSummary& s, std::uint64_t seed) {
  PeakAoiEstimate est;
  est.mean = s.peak.mean;
  est.std_error = std::sqrt(s.peak.variance() / static_cast<double>(s.peak.n));
  est.n_cycles = s.peak.n;
  est.seed = seed;
  est.mean_Y = s.Y.mean;
  est.mean_S = s.S.mean;
  return est;
}

inline void check_inputs(const PolicySpec& policy, const SystemParams& params,
                         const ScDistribution& dist, std::uint64_t n_cycles) {
  require_valid(params, dist, policy);
  if (n_cycles < 1) throw Error(ErrorKind::InvalidParam, "n_cycles must be >= 1");
}

}  // namespace detail

// Average peak AoI estimate over n_cycles measured deliveries. The first
// delivery only seeds the pairing S_0 and is not measured. Identical inputs
// give bit-identical output.
inline PeakAoiEstimate simulate(const PolicySpec& policy, const SystemParams& params,
                                const ScDistribution& dist, std::uint64_t n_cycles,
                                std::uint64_t seed, const SimOptions& options = {},
                                const Observer* observer = nullptr) {
  detail::check_inputs(policy, params, dist, n_cycles);
  const detail::CycleRunner runner(policy, params, dist, seed, options);
  detail::ChunkSummary total;
  const auto chunks = detail::chunk_count(n_cycles);
  for (std::uint64_t c = 0; c < chunks; ++c) {
    const std::uint64_t first = 1 + c * kChunkCycles;
    const std::uint64_t last = std::min(first + kChunkCycles, n_cycles + 1);
    total.merge(detail::run_chunk(runner, first, last, observer));
  }
  return detail::finish(total, seed);
}

// Same estimate as simulate(), with chunks spread over n_workers threads.
inline PeakAoiEstimate simulate_parallel(const PolicySpec& policy, const SystemParams& params,
                                         const ScDistribution& dist, std::uint64_t n_cycles,
                                         std::uint64_t seed, unsigned n_workers,
                                         const SimOptions& options = {}) {
  if (n_workers < 1) throw Error(ErrorKind::InvalidParam, "n_workers must be >= 1");
  detail::check_inputs(policy, params, dist, n_cycles);
  const auto chunks = detail::chunk_count(n_cycles);
  if (n_workers == 1 || chunks == 1) return simulate(policy, params, dist, n_cycles, seed, options);

  const detail::CycleRunner runner(policy, params, dist, seed, options);
  std::vector<detail::ChunkSummary> summaries(chunks);
  std::vector<std::exception_ptr> failures(chunks);
  std::atomic<std::uint64_t> next{0};
  auto work = [&] {
    for (std::uint64_t c = next++; c < chunks; c = next++) {
      const std::uint64_t first = 1 + c * kChunkCycles;
      const std::uint64_t last = std::min(first + kChunkCycles, n_cycles + 1);
      try {
        summaries[c] = detail::run_chunk(runner, first, last, nullptr);
      } catch (...) {
        failures[c] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto n_threads = std::min<std::uint64_t>(n_workers, chunks);
    for (std::uint64_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  detail::ChunkSummary total;
  for (const auto& s : summaries) total.merge(s);
  return detail::finish(total, seed);
}

// Worker count from AOI_WORKERS, else the hardware concurrency.
inline unsigned default_workers() {
  if (const char* env = std::getenv("AOI_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace aoi::sim
