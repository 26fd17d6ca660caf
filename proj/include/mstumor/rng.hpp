#pragma once

// Reproducible random numbers: std::mt19937_64 with a fixed 53-bit mapping to
// [0, 1), so sequences agree across standard libraries.

#include <cstdint>
#include <random>

namespace mstumor {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mstumor
