#pragma once

#include <cstdint>

namespace abf {

// SplitMix64. The constants are part of the reproducibility contract: traces
// and RANDOM-policy choices must replay identically on every platform, so no
// std:: distribution is used anywhere downstream of this generator.
//
//   state += 0x9e3779b97f4a7c15
//   z = (state ^ (state >> 30)) * 0xbf58476d1ce4e5b9
//   z = (z ^ (z >> 27)) * 0x94d049bb133111eb
//   return z ^ (z >> 31)
class SplitMix64 {
 public:
  constexpr SplitMix64() = default;
  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  constexpr double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n) without modulo bias. n must be positive.
  constexpr std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  constexpr std::uint64_t state() const { return state_; }

  constexpr bool operator==(const SplitMix64&) const = default;

 private:
  std::uint64_t state_ = 0;
};

}  // namespace abf
