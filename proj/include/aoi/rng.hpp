#pragma once

#include <cmath>
#include <cstdint>

// Counter-based random draws.
//
// Every random quantity of the simulation is addressed by a key
// (seed, cycle, generation, attempt, purpose) and obtained by hashing the key
// with the splitmix64 finalizer:
//
//   h0 = mix(seed ^ 0x6a09e667f3bcc909)
//   h1 = mix(h0 ^ cycle)
//   h2 = mix(h1 ^ (generation << 32 | attempt))
//   h3 = mix(h2 ^ purpose)
//   u  = (h3 >> 11) * 2^-53
//
// where mix(z) adds 0x9e3779b97f4a7c15 and applies the multiply/xorshift
// finalizer with constants 0xbf58476d1ce4e5b9 and 0x94d049bb133111eb. The
// same key yields the same draw on every platform, independently of how
// cycles are distributed over chunks or threads, and two policies simulated
// with the same seed see the same C, I and erasure values for the same
// (cycle, generation, attempt).
namespace aoi::rng {

constexpr std::uint64_t mix(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

enum class Purpose : std::uint64_t {
  ScTime = 1,
  ScRecharge = 2,
  Coin = 3,
  Erasure = 4,
  TxRecharge = 5,
  InitialOutage = 6,
};

inline double exponential(double u, double rate) noexcept { return -std::log(1.0 - u) / rate; }

// Draws belonging to one renewal cycle.
class CycleStream {
 public:
  CycleStream(std::uint64_t seed, std::uint64_t cycle) noexcept
      : base_(mix(mix(seed ^ 0x6a09e667f3bcc909ULL) ^ cycle)) {}

  double uniform(std::uint32_t generation, std::uint32_t attempt, Purpose purpose) const noexcept {
    const std::uint64_t slot = (static_cast<std::uint64_t>(generation) << 32) | attempt;
    return to_unit(mix(mix(base_ ^ slot) ^ static_cast<std::uint64_t>(purpose)));
  }

 private:
  std::uint64_t base_;
};

// Small sequential generator (splitmix64) satisfying UniformRandomBitGenerator;
// used where draws need no addressing.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept {
    const std::uint64_t out = mix(state_);
    state_ += 0x9e3779b97f4a7c15ULL;
    return out;
  }

 private:
  std::uint64_t state_;
};

}  // namespace aoi::rng
