#pragma once

#include <cstdint>
#include <random>

namespace harmonia {

/// Seeded random source with platform-independent derived draws.
///
/// std::mt19937_64 output is pinned by the standard, but the standard
/// distributions are not; every draw here is built directly from the raw
/// 64-bit stream so that a seed reproduces the same sequence everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1), 53 bits of entropy.
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform index in [0, n). n must be >= 1.
  std::size_t next_index(std::size_t n) {
    // Multiplicative range reduction; bias is < 2^-53 per draw.
    auto i = static_cast<std::size_t>(next_double() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  bool next_bool() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace harmonia
