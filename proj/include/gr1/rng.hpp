#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace gr1 {

// splitmix64, used to derive stream seeds from (seed, tag...) tuples.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
  return mix64(a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
}

template <class... Rest>
uint64_t hash_combine(uint64_t a, uint64_t b, Rest... rest) {
  return hash_combine(hash_combine(a, b), uint64_t(rest)...);
}

// Deterministic RNG. mt19937_64 output is pinned by the standard; the
// distributions below are our own so streams are identical across
// compilers and standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(mix64(seed)) {}

  uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1) with 53 random bits
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint64_t uniform_int(uint64_t n) {
    // rejection sampling, exact and portable
    const uint64_t bound = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = engine_();
    while (v >= bound) v = engine_();
    return v % n;
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + stddev * r * std::cos(theta);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Fisher-Yates
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = size_t(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gr1
