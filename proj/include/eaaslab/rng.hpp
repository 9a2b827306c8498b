#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace eaaslab {

// Counter-based RNG utilities. Every randomized pipeline stage owns a named
// stream derived from the experiment seed, so stages are independently
// reproducible and parallel execution order cannot change results.
//
// All draws go through our own uniform/normal helpers instead of
// std::*_distribution: the standard distributions are implementation-defined,
// and we want bit-identical runs.

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

// xoshiro256** — small, fast, and fully portable.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : s_) w = x = splitmix64(x);
  }

  uint64_t next() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
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
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // uniform in [lo,hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0,n)
  uint64_t index(uint64_t n) {
    // rejection sampling keeps the draw exactly uniform
    const uint64_t threshold = -n % n;
    for (;;) {
      uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  bool bernoulli(double p) { return uniform() < p; }

  // standard normal via Box-Muller
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * M_PI * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Named stream derivation: seed -> (stage name, counters) -> fresh Rng.
inline Rng named_rng(uint64_t root_seed, std::string_view stream, uint64_t a = 0, uint64_t b = 0) {
  uint64_t h = splitmix64(root_seed ^ fnv1a64(stream));
  h = splitmix64(h ^ (a * 0x9e3779b97f4a7c15ull));
  h = splitmix64(h ^ (b * 0xd1b54a32d192ed03ull));
  return Rng(h);
}

}  // namespace eaaslab
