#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace cavsim {

/// splitmix64 output function. Every sub-seed in the simulator is derived
/// through this so that streams are independent of evaluation order.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives a child seed from a parent seed and two indices.
///   child = splitmix64(splitmix64(splitmix64(parent) ^ a) ^ b)
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a,
                                    std::uint64_t b = 0) noexcept {
  return splitmix64(splitmix64(splitmix64(parent) ^ a) ^ b);
}

/// Tags for the independent random streams used inside one run.
enum class Stream : std::uint64_t {
  kFleetShuffle = 1,
  kDriverHeadway = 2,
  kLeadProfile = 3,
  kPerception = 4,
  kGps = 5,
  kRadar = 6,
};

/// mt19937_64 with portable uniform/normal transforms (the standard library
/// distributions are implementation-defined, these are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Unbiased integer in [0, bound) (Lemire's multiply-shift with rejection).
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t x = engine_();
      __extension__ using u128 = unsigned __int128;
      const u128 m = static_cast<u128>(x) * bound;
      if (static_cast<std::uint64_t>(m) >= threshold)
        return static_cast<std::uint64_t>(m >> 64);
    }
  }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Rng make_stream(std::uint64_t run_seed, Stream stream,
                       std::uint64_t index = 0) {
  return Rng(derive_seed(run_seed, static_cast<std::uint64_t>(stream), index));
}

}  // namespace cavsim
