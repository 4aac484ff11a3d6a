#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace counterclr {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent substreams from one seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Substream tags. Each consumer of randomness in a run draws from its own
// stream so that adding a consumer never perturbs another one's sequence.
enum class Stream : std::uint64_t {
  kInit = 1,
  kShuffle = 2,
  kNegatives = 3,
  kContrastUsers = 4,
  kContrastItems = 5,
  kSplit = 6,
  kGroundTruth = 7,
  kExposure = 8,
  kPropensityModel = 9,
  kImputation = 10,
  kValidation = 11,
};

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  return Rng(mix_seed(mix_seed(seed) ^ static_cast<std::uint64_t>(stream)));
}

// Uniform double in [0, 1) from the top 53 bits; independent of the
// standard library's distribution implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) by rejection; n > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

}  // namespace counterclr

namespace counterclr {

// Box-Muller draw without cached second value, so every call consumes
// exactly two words of the stream.
inline double standard_normal(Rng& rng) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  double u1;
  do {
    u1 = uniform01(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

}  // namespace counterclr
