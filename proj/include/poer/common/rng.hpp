#pragma once

#include <cstdint>
#include <random>

namespace poer {

// Seeded random source. Every stochastic component owns one of these so that
// runs are reproducible from a single root seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

  // Poisson draw; mean 0 is the degenerate distribution at 0.
  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<int>(mean)(engine_);
  }

  // Derives an independent child stream.
  Rng split() {
    std::seed_seq seq{engine_(), engine_(), engine_(), engine_()};
    std::mt19937_64 child(seq);
    return Rng(child);
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  explicit Rng(std::mt19937_64 engine) : engine_(engine) {}

  std::mt19937_64 engine_;
};

}  // namespace poer
