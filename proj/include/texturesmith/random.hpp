#pragma once

#include <cstdint>
#include <random>

namespace texturesmith {

/// Seeded uniform source with a fixed bit-to-real mapping, so a seed yields
/// the same stream on every standard library (std::uniform_real_distribution
/// makes no such promise).
class SeededUniform {
 public:
  explicit SeededUniform(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double next() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double next(double lo, double hi) { return lo + (hi - lo) * next(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace texturesmith
