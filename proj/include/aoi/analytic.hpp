#pragma once

#include <cmath>
#include <optional>
#include <variant>

#include "aoi/error.hpp"
#include "aoi/model.hpp"

// Closed-form average peak AoI for the window and probabilistic schemes,
// with and without feedback, under the two-point S/C law.
namespace aoi::analytic {

// x^n by repeated squaring; keeps pe^B exact for small integer B.
inline double ipow(double x, int n) noexcept {
  double result = 1.0;
  while (n > 0) {
    if (n & 1) result *= x;
    x *= x;
    n >>= 1;
  }
  return result;
}

// Law of M = C + I with I ~ Exp(lambda) independent of C.
class MDistribution {
 public:
  MDistribution(const ScDistribution& dist, double lambda) : dist_(dist), lambda_(lambda) {
    if (!dist.is_two_point()) {
      throw Error(ErrorKind::InvalidParam, "closed forms need the two-point S/C distribution");
    }
    if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidParam, "lambda must be > 0");
  }

  double lambda() const noexcept { return lambda_; }
  const ScDistribution& sc() const noexcept { return dist_; }

  double mean() const noexcept { return dist_.mean() + 1.0 / lambda_; }

  // Pr(M <= x).
  double cdf(double x) const noexcept {
    if (std::isinf(x) && x > 0) return 1.0;
    return dist_.p1() * piece_cdf(x, dist_.m1()) + dist_.p2() * piece_cdf(x, dist_.m2());
  }

  // E[M 1{M <= x}].
  double partial_mean(double x) const noexcept {
    if (std::isinf(x) && x > 0) return mean();
    return dist_.p1() * piece_partial(x, dist_.m1()) + dist_.p2() * piece_partial(x, dist_.m2());
  }

  // E[M | M <= W].
  double cond_mean_below(double W) const {
    if (std::isinf(W) && W > 0) return mean();
    const double q = cdf(W);
    if (!(q > 0.0)) {
      throw Error(ErrorKind::GateNeverPasses, "Pr(C + I <= W) = 0 at W = " + std::to_string(W));
    }
    return partial_mean(W) / q;
  }

  double density(double x) const noexcept {
    return dist_.p1() * piece_density(x, dist_.m1()) + dist_.p2() * piece_density(x, dist_.m2());
  }

 private:
  // Unit step with u(0) = 1; the accompanying factor vanishes at the step anyway.
  static bool step(double x) noexcept { return x >= 0.0; }

  double piece_cdf(double x, double m) const noexcept {
    if (!step(x - m)) return 0.0;
    return 1.0 - std::exp(-lambda_ * (x - m));
  }

  double piece_partial(double x, double m) const noexcept {
    if (!step(x - m)) return 0.0;
    const double inv = 1.0 / lambda_;
    return m + inv - (x + inv) * std::exp(-lambda_ * (x - m));
  }

  double piece_density(double x, double m) const noexcept {
    if (!step(x - m)) return 0.0;
    return lambda_ * std::exp(-lambda_ * (x - m));
  }

  ScDistribution dist_;
  double lambda_;
};

inline double m_cdf(const MDistribution& md, double x) noexcept { return md.cdf(x); }
inline double m_partial_mean(const MDistribution& md, double x) noexcept {
  return md.partial_mean(x);
}
inline double m_cond_mean_below(const MDistribution& md, double W) {
  return md.cond_mean_below(W);
}

// Outcome of the attempt counter for one committed window-scheme update:
// success at attempt 1..B, or B failures (the B+ symbol).
struct AttemptOutcome {
  int attempts;
  bool exhausted;  // true for B+

  static AttemptOutcome success_at(int v) { return {v, false}; }
  static AttemptOutcome failed(int B) { return {B, true}; }
};

inline double trunc_geom_pmf(double pe, int B, AttemptOutcome v) {
  if (B < 1) throw Error(ErrorKind::InvalidParam, "B must be >= 1");
  if (v.exhausted) return v.attempts == B ? ipow(pe, B) : 0.0;
  if (v.attempts < 1 || v.attempts > B) return 0.0;
  return (1.0 - pe) * ipow(pe, v.attempts - 1);
}

namespace detail {

inline void require_closed_form(const SystemParams& params, const ScDistribution& dist,
                                const PolicySpec& policy) {
  if (auto e = validate(params, dist, policy)) {
    if (e->kind() == ErrorKind::DeadPolicy) throw Error(ErrorKind::GateNeverPasses, e->what());
    throw *e;
  }
}

// Pieces shared by the window schemes: E[n~] E[A] + 1/lambda, and E[T | n^ != B+].
struct WindowPieces {
  double outer;           // 1/lambda + E[n~] E[A]
  double success_tx;      // E[T | n^ != B+]
  double cond_initial;    // E[C + I | C + I <= W]
};

inline WindowPieces window_pieces(const SystemParams& params, const ScDistribution& dist,
                                  double W, int B) {
  const MDistribution md(dist, params.lambda);
  const double inv = 1.0 / params.lambda;
  const double D = params.D;
  const double pe = params.pe;
  const double q = md.cdf(W);
  if (!(q > 0.0)) throw Error(ErrorKind::GateNeverPasses, "Pr(C + I <= W) = 0");
  const double peB = ipow(pe, B);

  const double expected_generations = 1.0 / ((1.0 - peB) * q);
  const double failed_tx = B * (D + inv);
  const double weighted_success_tx = ((1.0 - peB) / (1.0 - pe) - B * peB) * D +
                                     ((1.0 - peB) / (1.0 - pe) - (1.0 - peB) - B * peB) * inv;
  const double expected_tx = q * peB * failed_tx + q * weighted_success_tx;
  const double expected_generation_time = dist.mean() + inv + expected_tx;

  WindowPieces pieces{};
  pieces.outer = inv + expected_generations * expected_generation_time;
  pieces.success_tx = weighted_success_tx / (1.0 - peB);
  pieces.cond_initial = md.cond_mean_below(W);
  return pieces;
}

struct ProbPieces {
  double outer;         // 1/lambda + E[n~] E[A]
  double success_tx;    // (D + pe pTx / lambda) / (1 - pe pTx)
  double cond_initial;  // E[C + I | C + I <= W]
};

inline ProbPieces prob_pieces(const SystemParams& params, const ScDistribution& dist, double W,
                              double pTx) {
  const MDistribution md(dist, params.lambda);
  const double inv = 1.0 / params.lambda;
  const double D = params.D;
  const double pe = params.pe;
  const double q = md.cdf(W);
  if (!(q > 0.0)) throw Error(ErrorKind::GateNeverPasses, "Pr(C + I <= W) = 0");
  const double a = pe * pTx;
  const double denom = (1.0 - a) * (1.0 - a);

  const double expected_generations = (1.0 - a) / (q * pTx * (1.0 - pe));
  const double gated_tx = ((1.0 - pTx) * pe * pTx / denom) * (D + inv) +
                          (pTx * (1.0 - pe) / denom) * (D + a * inv);
  const double expected_generation_time = dist.mean() + inv + q * gated_tx;

  ProbPieces pieces{};
  pieces.outer = inv + expected_generations * expected_generation_time;
  pieces.success_tx = (D + a * inv) / (1.0 - a);
  pieces.cond_initial = md.cond_mean_below(W);
  return pieces;
}

}  // namespace detail

inline double peak_aoi_window_fb(const SystemParams& params, const ScDistribution& dist, double W,
                                 int B) {
  detail::require_closed_form(params, dist, WindowFb{W, B});
  const auto p = detail::window_pieces(params, dist, W, B);
  return p.outer + (p.cond_initial + p.success_tx);
}

// Without feedback all B attempts are sent; the delivered update's system time
// plus the wasted tail equals C + I + B D + (B - 1) / lambda.
inline double peak_aoi_window_nofb(const SystemParams& params, const ScDistribution& dist,
                                   double W, int B) {
  detail::require_closed_form(params, dist, WindowNoFb{W, B});
  const auto p = detail::window_pieces(params, dist, W, B);
  const double all_attempts = B * params.D + (B - 1) * (1.0 / params.lambda);
  return p.outer + (p.cond_initial + all_attempts);
}

inline double peak_aoi_prob_fb(const SystemParams& params, const ScDistribution& dist, double W,
                               double pTx) {
  detail::require_closed_form(params, dist, ProbFb{W, pTx});
  const auto p = detail::prob_pieces(params, dist, W, pTx);
  return p.outer + (p.cond_initial + p.success_tx);
}

// Mean wasted retransmission time after delivery without feedback.
inline double prob_nofb_extension(const SystemParams& params, double pTx) noexcept {
  return (params.D + 1.0 / params.lambda) * pTx / (1.0 - pTx);
}

inline double peak_aoi_prob_nofb(const SystemParams& params, const ScDistribution& dist, double W,
                                 double pTx) {
  detail::require_closed_form(params, dist, ProbNoFb{W, pTx});
  const auto p = detail::prob_pieces(params, dist, W, pTx);
  return p.outer + (p.cond_initial + p.success_tx + prob_nofb_extension(params, pTx));
}

// Optimal average peak AoI with feedback, expressed through the optimal threshold.
inline double theorem1_optimal_value(const SystemParams& params, double W_th) noexcept {
  const double pe = params.pe;
  const double D = params.D;
  return D / (1.0 - pe) + W_th + D + 1.0 / ((1.0 - pe) * params.lambda);
}

// Closed form for the policy, or nullopt for the simulation-only threshold schemes.
inline std::optional<double> peak_aoi(const SystemParams& params, const ScDistribution& dist,
                                      const PolicySpec& policy) {
  struct Eval {
    const SystemParams& params;
    const ScDistribution& dist;
    std::optional<double> operator()(const ThresholdFb&) const { return std::nullopt; }
    std::optional<double> operator()(const ThresholdNoFb&) const { return std::nullopt; }
    std::optional<double> operator()(const WindowFb& p) const {
      return peak_aoi_window_fb(params, dist, p.W, p.B);
    }
    std::optional<double> operator()(const WindowNoFb& p) const {
      return peak_aoi_window_nofb(params, dist, p.W, p.B);
    }
    std::optional<double> operator()(const ProbFb& p) const {
      return peak_aoi_prob_fb(params, dist, p.W, p.pTx);
    }
    std::optional<double> operator()(const ProbNoFb& p) const {
      return peak_aoi_prob_nofb(params, dist, p.W, p.pTx);
    }
  };
  return std::visit(Eval{params, dist}, policy);
}

inline bool has_closed_form(const PolicySpec& policy) noexcept {
  return !std::holds_alternative<ThresholdFb>(policy) &&
         !std::holds_alternative<ThresholdNoFb>(policy);
}

}  // namespace aoi::analytic
