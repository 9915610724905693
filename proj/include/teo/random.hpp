#pragma once

// Reproducible random streams.
//
// std::mt19937_64 has a bit-exact definition in the standard, but the
// standard distributions do not, so the draws used for perturbation and
// random insertion are implemented here on top of the raw engine output.

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>

namespace teo {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Per-sample stream: mt19937_64 seeded with splitmix64(seed ^ fnv1a64(id)).
  /// Independent of corpus order and of how samples are scheduled.
  static RandomStream for_sample(std::uint64_t seed, std::string_view sample_id) {
    return RandomStream(splitmix64(seed ^ fnv1a64(sample_id)));
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform on (0, 1]: p <= 0 never fires and p >= 1 always fires.
  double uniform01() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

  /// Uniform integer in [0, n), unbiased by rejection.
  std::size_t index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("RandomStream::index: empty range");
    const std::uint64_t bound = n;
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return static_cast<std::size_t>(r % bound);
    }
  }

  /// Uniform integer in [lo, hi].
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + index(hi - lo + 1); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace teo
