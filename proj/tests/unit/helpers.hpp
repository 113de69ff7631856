#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>

#include "fvp/data.hpp"
#include "fvp/grid.hpp"
#include "fvp/random.hpp"

namespace fvp::test {

inline RealGrid random_real(int H, int W, int C, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  RealGrid x(H, W, C);
  for (double& v : x.values()) v = rng.uniform(lo, hi);
  return x;
}

inline ComplexGrid random_complex(int H, int W, int C, std::uint64_t seed) {
  Rng rng(seed);
  ComplexGrid z(H, W, C);
  for (Complex& v : z.values()) v = Complex(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
  return z;
}

/// Random per-pixel probability simplex.
inline RealGrid random_probs(int H, int W, int C, Rng& rng, double sharpness = 3.0) {
  RealGrid p(H, W, C);
  for (int h = 0; h < H; ++h)
    for (int w = 0; w < W; ++w) {
      double total = 0.0;
      for (int c = 0; c < C; ++c) total += p(h, w, c) = std::exp(sharpness * rng.normal());
      for (int c = 0; c < C; ++c) p(h, w, c) /= total;
    }
  return p;
}

inline LabelGrid random_labels(int H, int W, int n_classes, Rng& rng) {
  LabelGrid y(H, W, 1);
  for (auto& v : y.values()) v = static_cast<std::uint8_t>(rng.below(n_classes));
  return y;
}

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("fvp_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fvp::test
