#pragma once

#include <cstdint>

namespace safear {

/// Counter-based pseudo-random stream (SplitMix64).
///
/// The state is a plain 64-bit counter advanced by the golden-ratio increment;
/// every output is a finalizer hash of the counter, so streams with different
/// seeds never share structure and a stream can be reproduced from its seed
/// alone. Substreams for parallel work are derived as seed + substream index.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : counter_(seed) {}

  std::uint64_t next_u64() {
    counter_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = counter_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(next_unit() * static_cast<double>(n)) % n;
  }

 private:
  std::uint64_t counter_;
};

/// Substream seed for the given index (documented contract: seed + index).
inline std::uint64_t substream_seed(std::uint64_t base_seed, std::uint64_t index) {
  return base_seed + index;
}

}  // namespace safear
