#pragma once

#include <cstdint>
#include <random>

#include "iahash/util.hpp"

namespace iahash {

// Deterministic RNG: mt19937_64 has a standard-mandated output stream, and
// all conversions below are written out explicitly, so the same seed gives
// the same values on every platform.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream keyed by (seed, stream, substream).
  static SeededRng derived(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0) {
    std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc908ull);
    h = mix64(h ^ mix64(stream));
    h = mix64(h ^ mix64(substream ^ 0xbb67ae8584caa73bull));
    return SeededRng(h);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, n). n = 0 is rejected.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("SeededRng::below: n must be positive");
    return next_u64() % n;
  }

  // Uniform integer in [lo, hi], inclusive.
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw std::invalid_argument("SeededRng::range: empty range");
    return lo + std::int64_t(below(std::uint64_t(hi - lo) + 1));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace iahash
