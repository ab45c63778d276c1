#pragma once

#include <cmath>
#include <cstdint>

namespace dualms {

/// Counter-based random stream. Every consumer derives its own stream from
/// the single pipeline seed plus a stream id, so stages can be re-run in any
/// order without perturbing each other. Output for a given (seed, stream,
/// counter) triple is fixed across platforms.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(mix(seed + 0x9e3779b97f4a7c15ull) ^ mix(stream))) {}

  std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ull * ++counter_); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (explicit so results do not depend on a
  /// library's distribution implementation).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  // SplitMix64 finalizer.
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Stream ids used across the pipeline.
namespace rng_stream {
inline constexpr std::uint64_t kSampleInterior = 1;
inline constexpr std::uint64_t kCvt = 2;
inline constexpr std::uint64_t kMaxcutInit = 3;
inline constexpr std::uint64_t kModelInit = 4;
inline constexpr std::uint64_t kTrainOmega = 5;
inline constexpr std::uint64_t kTrainNoise = 6;
inline constexpr std::uint64_t kTrainMinibatch = 7;
inline constexpr std::uint64_t kSkeletonSampling = 8;
}  // namespace rng_stream

}  // namespace dualms
