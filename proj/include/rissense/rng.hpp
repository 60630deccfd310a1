#ifndef RISSENSE_RNG_HPP
#define RISSENSE_RNG_HPP

#include <cstdint>
#include <random>

#include "rissense/common.hpp"

namespace rissense {

// std::mt19937_64 output is fixed by the standard, but std::*_distribution
// is not, so every distribution used here is implemented explicitly. All
// randomness in the toolkit flows through this file.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a master seed and up to three
// stream coordinates (scenario, capture index, stream tag, ...).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = splitmix64(master ^ 0x6a09e667f3bcc908ULL);
  s = splitmix64(s ^ a);
  s = splitmix64(s ^ b);
  s = splitmix64(s ^ c);
  return s;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  // Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Circularly-symmetric complex normal CN(0,1): E|z|^2 = 1.
  Complex cnormal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-std::log(u1));
    const double a = 2.0 * M_PI * u2;
    return {r * std::cos(a), r * std::sin(a)};
  }

  // Unit-power QPSK point, one of (+-1 +-1j)/sqrt(2).
  Complex qpsk() {
    const std::uint64_t b = engine_() >> 62;
    constexpr double s = M_SQRT1_2;
    return {b & 1 ? s : -s, b & 2 ? s : -s};
  }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rissense

#endif
