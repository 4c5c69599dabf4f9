#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fmuxnet {

// Seeded generator shared by the simulators. Uniform draws are built from raw
// 64-bit output so traces do not depend on library distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Exponential with the given rate, by inverse CDF.
  double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

  // Uniform in [0, n); n > 0. Rejection keeps it unbiased.
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  std::uint64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<std::uint64_t> dist(mean);
    return dist(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fmuxnet
