#pragma once

#include <cmath>
#include <cstdint>

namespace scopeline {

// SplitMix64 (Steele, Lea, Flood 2014). Each call to next() is one "draw".
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) from the top 53 bits of one draw.
  double uniform() { return to_unit(next()); }

  // Uniform integer in [lo, hi] (inclusive) from one draw.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(uniform() * static_cast<double>(span));
  }

  // Standard normal from one draw: the high and low 32-bit halves feed the
  // cosine branch of Box-Muller.
  double gaussian() {
    const std::uint64_t bits = next();
    const double u1 = (static_cast<double>(bits >> 32) + 1.0) / 4294967296.0;  // (0, 1]
    const double u2 = static_cast<double>(bits & 0xFFFFFFFFULL) / 4294967296.0;  // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Poisson(mean) by CDF inversion of one uniform draw.
  std::int64_t poisson(double mean) {
    if (mean <= 0.0) {
      next();
      return 0;
    }
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::int64_t k = 0;
    while (u >= cdf && k < 10'000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
      if (p == 0.0 && static_cast<double>(k) > mean) break;
    }
    return k;
  }

  static double to_unit(std::uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

}  // namespace scopeline
