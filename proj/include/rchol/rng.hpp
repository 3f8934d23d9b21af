#pragma once

#include <cstdint>
#include <random>

namespace rchol {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seedable uniform [0,1) stream.
///
/// std::mt19937_64 with a hand-rolled 53-bit conversion to double, so a seed
/// yields the same draws on every platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : engine_(splitmix64(seed)) {}

  /// Stream for a sub-task, decorrelated from the parent seed and from siblings.
  static RngStream derived(std::uint64_t seed, std::uint64_t task_id) {
    return RngStream(splitmix64(seed) ^ splitmix64(task_id * 0xD6E8FEB86659FD93ull + 1));
  }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, bound) without modulo bias.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rchol
