// Counter-keyed random streams. Every consumer derives its own stream from
// (seed, path...) so results are reproducible regardless of thread count or
// evaluation order. No global state, no implementation-defined distributions.
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace dyadnet {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256** seeded from a key path hashed with splitmix64.
class RngStream {
 public:
  RngStream() : RngStream(0, {}) {}

  RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t x = seed;
    (void)splitmix64(x);
    for (std::uint64_t p : path) {
      x ^= p + 0x9e3779b97f4a7c15ULL + (x << 6) + (x >> 2);
      (void)splitmix64(x);
    }
    for (auto& word : state_) word = splitmix64(x);
  }

  // Child stream, e.g. per replication or per bootstrap draw.
  RngStream child(std::uint64_t tag) const {
    RngStream s;
    std::uint64_t x = state_[0] ^ (state_[2] + tag);
    for (auto& word : s.state_) word = splitmix64(x);
    s.have_spare_ = false;
    return s;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on (0,1); never returns 0 or 1 exactly.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller with a cached spare.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Standard logistic.
  double logistic() {
    const double u = uniform();
    return std::log(u / (1.0 - u));
  }

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Poisson draw: multiplication method for small means, PTRS otherwise.
  long poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 30.0) {
      const double limit = std::exp(-mean);
      double prod = 1.0;
      long k = -1;
      do {
        prod *= uniform();
        ++k;
      } while (prod > limit);
      return k;
    }
    return poisson_ptrs(mean);
  }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  // Hoermann's PTRS transformed-rejection sampler.
  long poisson_ptrs(double mean) {
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::fabs(u);
      const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
      if (us >= 0.07 && v <= vr) return static_cast<long>(k);
      if (k < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
          k * loglam - mean - std::lgamma(k + 1.0)) {
        return static_cast<long>(k);
      }
    }
  }

  std::uint64_t state_[4] = {1, 2, 3, 4};
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace dyadnet
