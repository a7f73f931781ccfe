// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_RNG_HPP
#define DPA_RNG_HPP

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace dpa {

/// splitmix64: tiny, fast, well-mixed generator. Used everywhere a seeded
/// stream is needed so behaviour is identical across platforms and standard
/// library implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [0, bound), bound >= 1. Rejection sampling, unbiased.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % bound;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (deterministic, no cached spare).
  double next_gaussian() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::uint64_t state_;
};

/// FNV-1a, used for config hashes and for deriving per-record seeds.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Per-record generator: seeded from (global seed, record key) so emission
/// order never affects the draw for a given record.
inline SplitMix64 record_rng(std::uint64_t global_seed, std::string_view key) {
  return SplitMix64(global_seed ^ (fnv1a64(key) * 0x9E3779B97F4A7C15ULL));
}

/// Fisher-Yates with an explicit generator; std::shuffle is
/// implementation-defined and would break cross-platform determinism.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace dpa

#endif  // DPA_RNG_HPP
