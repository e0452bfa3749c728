#pragma once

#include "wgspdc/common.hpp"

#include <cmath>
#include <cstdint>

namespace wgspdc {

// xoshiro256** with splitmix64 seeding. Self-contained so that seeded runs
// are bit-identical across standard libraries and platforms.
class Rng {
public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& si : s_) si = (x = splitmix64(x));
  }

  // Independent stream for a (seed, stream index) pair.
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    return Rng(splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
  }

  std::uint64_t next_u64() {
    auto rotl = [](std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
    std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1): 53 random mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal, Box-Muller (one value per call; spare cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Poisson sample. Knuth multiplication below the threshold, normal
  // approximation (rounded, clamped at 0) above it; adequate for the count
  // statistics simulated here where lambda is either small or >> 1.
  std::uint64_t poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda < 60.0) {
      double limit = std::exp(-lambda);
      std::uint64_t k = 0;
      double p = 1.0;
      do {
        ++k;
        p *= uniform();
      } while (p > limit);
      return k - 1;
    }
    double v = std::round(lambda + std::sqrt(lambda) * normal());
    return v <= 0.0 ? 0 : static_cast<std::uint64_t>(v);
  }

private:
  std::uint64_t s_[4]{};
  bool have_spare_ = false;
  double spare_ = 0.0;
};

} // namespace wgspdc
