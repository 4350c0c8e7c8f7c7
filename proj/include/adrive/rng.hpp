#pragma once

#include <cmath>
#include <cstdint>

namespace adrive {

// splitmix64, used both as a stream generator and as a stateless
// counter-based hash so lazily evaluated draws stay order-independent.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2)));
}

// Small deterministic RNG stream. Distribution code is hand-rolled so
// results do not depend on the standard library implementation.
class Rng {
 public:
  Rng() : state_(0x853c49e6748fea9bULL) {}
  explicit Rng(std::uint64_t seed) : state_(splitmix64(seed)) {}

  std::uint64_t next_u64() {
    state_ = splitmix64(state_);
    return state_;
  }

  // uniform on [0,1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double exponential(double mean) {
    return -mean * std::log1p(-uniform());
  }

  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform() < p;
  }

  // Derive an independent child stream, e.g. one per vehicle.
  Rng child(std::uint64_t key) const { return Rng(hash_combine(state_, key)); }

 private:
  std::uint64_t state_;
};

// Stateless draw: same (seed, keys) always gives the same value no matter
// when or on which thread it is evaluated.
inline double hashed_uniform(std::uint64_t seed, std::uint64_t k1,
                             std::uint64_t k2, std::uint64_t k3) {
  std::uint64_t h = hash_combine(hash_combine(hash_combine(seed, k1), k2), k3);
  return static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53;
}

}  // namespace adrive
