#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "aoi/error.hpp"

namespace aoi {

// Sentinel for an unbounded age threshold.
inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

// Channel, energy and transmission constants. Outage (recharge) times are
// Exp(lambda); every (re)transmission lasts exactly D and is erased with
// probability pe.
struct SystemParams {
  double lambda = 1.0;
  double pe = 0.0;
  double D = 1.0;

  double mean_outage() const noexcept { return 1.0 / lambda; }
};

// Law of the sensing/computing time C.
//
// Either the two-point family {m1 w.p. 1-p2, m2 w.p. p2} (a deterministic C
// is the p2 = 0 case) or an empirical law given by a list of observed
// durations. Closed forms are only available for the two-point family.
class ScDistribution {
 public:
  static ScDistribution two_point(double m1, double m2, double p2) {
    ScDistribution d;
    d.m1_ = m1;
    d.m2_ = m2;
    d.p2_ = p2;
    return d;
  }

  // m1 = 1, m2 = 10 + theta, p2 = 4 / (9 + theta): mean 5, variance 20 + 4 theta.
  static ScDistribution from_theta(double theta) {
    if (!(theta >= 0.0) || !std::isfinite(theta)) {
      throw Error(ErrorKind::InvalidParam, "theta must be a finite value >= 0");
    }
    return two_point(1.0, 10.0 + theta, 4.0 / (9.0 + theta));
  }

  static ScDistribution deterministic(double c) { return two_point(c, c, 0.0); }

  static ScDistribution empirical(std::vector<double> samples) {
    ScDistribution d;
    if (samples.empty()) {
      throw Error(ErrorKind::InvalidParam, "empirical S/C distribution needs at least one sample");
    }
    for (double s : samples) {
      if (!(s >= 0.0) || !std::isfinite(s)) {
        throw Error(ErrorKind::InvalidParam, "empirical S/C samples must be finite and >= 0");
      }
    }
    d.m1_ = *std::min_element(samples.begin(), samples.end());
    d.m2_ = *std::max_element(samples.begin(), samples.end());
    d.p2_ = 0.0;
    d.samples_ = std::make_shared<const std::vector<double>>(std::move(samples));
    return d;
  }

  bool is_two_point() const noexcept { return samples_ == nullptr; }

  double m1() const noexcept { return m1_; }
  double m2() const noexcept { return m2_; }
  double p1() const noexcept { return 1.0 - p2_; }
  double p2() const noexcept { return p2_; }

  std::span<const double> samples() const noexcept {
    return samples_ ? std::span<const double>(*samples_) : std::span<const double>();
  }

  double mean() const noexcept {
    if (samples_) return raw_moment(1);
    return p1() * m1_ + p2_ * m2_;
  }

  double second_moment() const noexcept {
    if (samples_) return raw_moment(2);
    return p1() * m1_ * m1_ + p2_ * m2_ * m2_;
  }

  double variance() const noexcept {
    const double m = mean();
    return second_moment() - m * m;
  }

  // Smallest value C takes with positive probability.
  double min_support() const noexcept {
    if (samples_) return m1_;
    return p2_ < 1.0 ? m1_ : m2_;
  }

  // Maps a uniform variate u in [0, 1) onto a draw of C.
  double sample(double u) const noexcept {
    if (samples_) {
      const auto n = samples_->size();
      auto idx = static_cast<std::size_t>(u * static_cast<double>(n));
      return (*samples_)[std::min(idx, n - 1)];
    }
    return u < p2_ ? m2_ : m1_;
  }

 private:
  double raw_moment(int k) const noexcept {
    double acc = 0.0;
    for (double s : *samples_) acc += k == 1 ? s : s * s;
    return acc / static_cast<double>(samples_->size());
  }

  double m1_ = 0.0;
  double m2_ = 0.0;
  double p2_ = 0.0;
  std::shared_ptr<const std::vector<double>> samples_;
};

// 53-bit uniform in [0, 1) from any 64-bit UniformRandomBitGenerator.
template <class Urbg>
double uniform53(Urbg& rng) {
  static_assert(std::is_same_v<typename Urbg::result_type, std::uint64_t>,
                "uniform53 expects a 64-bit generator");
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <class Urbg>
double sample_sc(const ScDistribution& dist, Urbg& rng) {
  return dist.sample(uniform53(rng));
}

// ---------------------------------------------------------------------------
// Policies

// Transmit whenever the current age is <= W; stop at the first success.
struct ThresholdFb {
  double W = kUnbounded;

  friend bool operator==(const ThresholdFb&, const ThresholdFb&) = default;
};

// Gate on the initial age, then up to B attempts, stopping at success.
struct WindowFb {
  double W = kUnbounded;
  int B = 1;

  friend bool operator==(const WindowFb&, const WindowFb&) = default;
};

// Gate on the initial age, then a pTx coin at each decision epoch.
struct ProbFb {
  double W = kUnbounded;
  double pTx = 1.0;

  friend bool operator==(const ProbFb&, const ProbFb&) = default;
};

// Gate on the initial age, then exactly B attempts regardless of outcome.
struct WindowNoFb {
  double W = kUnbounded;
  int B = 1;

  friend bool operator==(const WindowNoFb&, const WindowNoFb&) = default;
};

// Gate on the initial age, then a pTx coin at every epoch, even after delivery.
struct ProbNoFb {
  double W = kUnbounded;
  double pTx = 0.5;

  friend bool operator==(const ProbNoFb&, const ProbNoFb&) = default;
};

// Resend while the age is <= W, even after delivery.
struct ThresholdNoFb {
  double W = 10.0;

  friend bool operator==(const ThresholdNoFb&, const ThresholdNoFb&) = default;
};

using PolicySpec = std::variant<ThresholdFb, WindowFb, ProbFb, WindowNoFb, ProbNoFb, ThresholdNoFb>;

inline double threshold_of(const PolicySpec& policy) noexcept {
  return std::visit([](const auto& p) { return p.W; }, policy);
}

inline bool has_feedback(const PolicySpec& policy) noexcept {
  return std::holds_alternative<ThresholdFb>(policy) || std::holds_alternative<WindowFb>(policy) ||
         std::holds_alternative<ProbFb>(policy);
}

inline std::string scheme_name(const PolicySpec& policy) {
  struct Namer {
    std::string operator()(const ThresholdFb&) const { return "threshold-fb"; }
    std::string operator()(const WindowFb&) const { return "window-fb"; }
    std::string operator()(const ProbFb&) const { return "prob-fb"; }
    std::string operator()(const WindowNoFb&) const { return "window-nofb"; }
    std::string operator()(const ProbNoFb&) const { return "prob-nofb"; }
    std::string operator()(const ThresholdNoFb&) const { return "threshold-nofb"; }
  };
  return std::visit(Namer{}, policy);
}

// Builds a policy of the named scheme; parameters the scheme does not use are ignored.
inline PolicySpec make_policy(const std::string& scheme, double W, int B, double pTx) {
  if (scheme == "threshold-fb") return ThresholdFb{W};
  if (scheme == "window-fb") return WindowFb{W, B};
  if (scheme == "prob-fb") return ProbFb{W, pTx};
  if (scheme == "window-nofb") return WindowNoFb{W, B};
  if (scheme == "prob-nofb") return ProbNoFb{W, pTx};
  if (scheme == "threshold-nofb") return ThresholdNoFb{W};
  throw Error(ErrorKind::InvalidParam, "unknown scheme '" + scheme + "'");
}

inline constexpr const char* kSchemeNames[] = {"threshold-fb", "window-fb",  "prob-fb",
                                               "threshold-nofb", "window-nofb", "prob-nofb"};

// ---------------------------------------------------------------------------
// Validation

namespace detail {

inline std::optional<Error> invalid(const std::string& reason) {
  return Error(ErrorKind::InvalidParam, reason);
}

inline std::optional<Error> check_params(const SystemParams& p) {
  if (!(p.lambda > 0.0) || !std::isfinite(p.lambda)) return invalid("lambda must be finite and > 0");
  if (!(p.pe >= 0.0 && p.pe < 1.0)) return invalid("pe must lie in [0, 1)");
  if (!(p.D > 0.0) || !std::isfinite(p.D)) return invalid("D must be finite and > 0");
  return std::nullopt;
}

inline std::optional<Error> check_dist(const ScDistribution& d) {
  if (!d.is_two_point()) return std::nullopt;  // checked at construction
  if (!(d.m1() >= 0.0) || !std::isfinite(d.m1())) return invalid("m1 must be finite and >= 0");
  if (!(d.m2() >= d.m1()) || !std::isfinite(d.m2())) return invalid("m2 must be finite and >= m1");
  if (!(d.p2() >= 0.0 && d.p2() <= 1.0)) return invalid("p2 must lie in [0, 1]");
  return std::nullopt;
}

inline std::optional<Error> check_threshold(double W) {
  if (std::isnan(W) || !(W > 0.0)) return invalid("W must be > 0");
  return std::nullopt;
}

struct PolicyChecker {
  std::optional<Error> operator()(const ThresholdFb& p) const { return check_threshold(p.W); }
  std::optional<Error> operator()(const WindowFb& p) const { return window(p.W, p.B); }
  std::optional<Error> operator()(const WindowNoFb& p) const { return window(p.W, p.B); }
  std::optional<Error> operator()(const ProbFb& p) const {
    if (!(p.pTx > 0.0 && p.pTx <= 1.0)) return invalid("pTx must lie in (0, 1] with feedback");
    return check_threshold(p.W);
  }
  std::optional<Error> operator()(const ProbNoFb& p) const {
    if (!(p.pTx > 0.0 && p.pTx < 1.0)) {
      return invalid("pTx must lie in (0, 1) without feedback (pTx = 1 never releases the update)");
    }
    return check_threshold(p.W);
  }
  std::optional<Error> operator()(const ThresholdNoFb& p) const {
    if (!std::isfinite(p.W)) return invalid("threshold-nofb needs a finite W");
    return check_threshold(p.W);
  }

  static std::optional<Error> window(double W, int B) {
    if (B < 1) return invalid("B must be >= 1");
    return check_threshold(W);
  }
};

}  // namespace detail

// Returns the first violated invariant, or nullopt when the configuration can
// complete renewal cycles.
inline std::optional<Error> validate(const SystemParams& params, const ScDistribution& dist,
                                     const PolicySpec& policy) {
  if (auto e = detail::check_params(params)) return e;
  if (auto e = detail::check_dist(dist)) return e;
  if (auto e = std::visit(detail::PolicyChecker{}, policy)) return e;
  // C + I > min_support almost surely, so the gate passes with positive
  // probability iff W exceeds the smallest S/C time.
  if (!(threshold_of(policy) > dist.min_support())) {
    return Error(ErrorKind::DeadPolicy, "W = " + std::to_string(threshold_of(policy)) +
                                            " does not exceed the smallest S/C time " +
                                            std::to_string(dist.min_support()));
  }
  return std::nullopt;
}

inline void require_valid(const SystemParams& params, const ScDistribution& dist,
                          const PolicySpec& policy) {
  if (auto e = validate(params, dist, policy)) throw *e;
}

}  // namespace aoi
