#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fvp {

std::uint64_t splitmix64(std::uint64_t x);

/// Combines a base seed with stream identifiers into an independent sub-seed.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double sigma = 1.0) {
    return std::normal_distribution<double>(mean, sigma)(engine_);
  }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fvp
