#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace ctaug {

// Deterministic PRNG (xoshiro256** seeded via splitmix64) with self-contained
// distributions. std::shuffle / std::*_distribution are not stable across
// standard-library implementations, so every draw is defined here.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  // Uniform integer in [0, n), n >= 1.
  int64_t uniform_int(int64_t n);

  bool bernoulli(double p);

  double normal(double mean = 0.0, double stddev = 1.0);

  // Fisher-Yates, back to front.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
      int64_t j = uniform_int(i + 1);
      std::swap(v[i], v[static_cast<size_t>(j)]);
    }
  }

  // Independent child stream.
  Rng fork();

 private:
  std::array<uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ctaug
