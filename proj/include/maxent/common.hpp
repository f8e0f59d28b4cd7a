#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace maxent {

using Point = std::vector<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Thrown when a partition function or requested integral has no finite value.
class DivergentIntegralError : public std::runtime_error {
 public:
  explicit DivergentIntegralError(const std::string& what)
      : std::runtime_error(what) {}
};

// Thrown when a declared structural attribute is contradicted by sampling.
class DeclarationError : public std::runtime_error {
 public:
  explicit DeclarationError(const std::string& what)
      : std::runtime_error(what) {}
};

inline void validate_point(std::span<const double> x, int dimension,
                           const char* where) {
  if (static_cast<int>(x.size()) != dimension)
    throw std::invalid_argument(std::string(where) + ": point has dimension " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(dimension));
  for (double v : x)
    if (!std::isfinite(v))
      throw std::invalid_argument(std::string(where) +
                                  ": point has non-finite coordinate");
}

// --- deterministic random streams -----------------------------------------
//
// All randomized routines draw from these generators rather than from
// <random> distributions, whose output is implementation-defined. Identical
// seeds therefore give bit-identical streams on any platform.

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  // xoshiro256++
  uint64_t next_u64() {
    auto rotl = [](uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in [0,1)
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  // standard normal via Box-Muller; one value per call, cached pair
  double next_normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
  }

  // Student-t with 3 degrees of freedom
  double next_t3() {
    const double z = next_normal();
    double v = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double n = next_normal();
      v += n * n;
    }
    return z / std::sqrt(v / 3.0);
  }

 private:
  uint64_t s_[4]{};
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// Derives an independent stream from a base seed and a stream index.
inline uint64_t derive_seed(uint64_t seed, uint64_t stream) {
  uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  return splitmix64(s);
}

// --- low-discrepancy sampling ----------------------------------------------

inline double halton(uint64_t index, uint32_t base) {
  double f = 1.0;
  double r = 0.0;
  uint64_t i = index;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

inline constexpr uint32_t kHaltonPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19,
                                             23, 29, 31, 37, 41, 43, 47, 53};

// d-dimensional Halton point in [0,1)^d (index should start at 1).
inline void halton_point(uint64_t index, std::span<double> out) {
  for (size_t k = 0; k < out.size(); ++k)
    out[k] = halton(index, kHaltonPrimes[k % 16]);
}

// --- numerics ----------------------------------------------------------------

inline double log_sum_exp(std::span<const double> logs) {
  double m = -kInf;
  for (double v : logs) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : logs) s += std::exp(v - m);
  return m + std::log(s);
}

inline bool nearly_equal(double a, double b, double rel, double abs = 0.0) {
  return std::abs(a - b) <= std::max(abs, rel * std::max(std::abs(a), std::abs(b)));
}

}  // namespace maxent
