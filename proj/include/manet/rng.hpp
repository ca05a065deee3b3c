#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace manet {

// Deterministic random source. All draws go through fixed algorithms on top
// of mt19937 so that a given seed yields identical streams on every build
// (std::*_distribution output is not pinned by the standard).
class RandomSource {
 public:
  explicit RandomSource(uint64_t seed) : gen_(static_cast<uint32_t>(seed)) {}

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_()) * (1.0 / 4294967296.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n). Modulo bias is irrelevant at our n.
  int uniform_int(int n) { return static_cast<int>(gen_() % static_cast<uint32_t>(n)); }

  // Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 1e-12);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Normal(0, std) truncated to +/- 2 std by resampling.
  double trunc_normal(double stddev) {
    double z = normal();
    while (std::abs(z) > 2.0) z = normal();
    return z * stddev;
  }

 private:
  std::mt19937 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace manet
