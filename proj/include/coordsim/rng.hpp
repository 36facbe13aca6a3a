#pragma once

#include <cstdint>

namespace coordsim {

// 64-bit finalizer (splitmix64). Stateless, platform-independent; all
// randomness in the toolkit derives from it so that runs replay bit-exactly.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b));
}

/// Counter-based generator: output i of stream (seed, stream) is a pure
/// function of (seed, stream, i), so draws can be replayed or extended
/// without replaying the whole stream.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(hash_combine(seed, stream)) {}

  std::uint64_t next_u64() { return mix64(key_ ^ mix64(counter_++)); }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Unbiased uniform integer in [0, bound) via rejection.
  std::uint64_t next_bounded(std::uint64_t bound) {
    const std::uint64_t limit = bound * ((~std::uint64_t{0}) / bound);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % bound;
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Keyed one-shot bounded draw: uniform in [0, bound), a pure function of
/// (seed, stream, index). Used for per-symbol binning assignments.
inline std::uint64_t keyed_bounded(std::uint64_t seed, std::uint64_t stream,
                                   std::uint64_t index, std::uint64_t bound) {
  const std::uint64_t limit = bound * ((~std::uint64_t{0}) / bound);
  std::uint64_t salt = 0;
  for (;;) {
    const std::uint64_t v = mix64(hash_combine(hash_combine(seed, stream), index) ^ mix64(salt++));
    if (v < limit) return v % bound;
  }
}

}  // namespace coordsim
