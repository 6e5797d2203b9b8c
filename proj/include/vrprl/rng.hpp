#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace vrprl {

// SplitMix64 run as a counter-based generator: draw k of a stream keyed by
// `seed` is mix64(seed + (k + 1) * 0x9E3779B97F4A7C15). The whole state is the
// pair (seed, counter), so any draw is addressable and seeds are portable to
// other implementations of the same mixer.
//
// Uniform reals take the top 53 bits; bounded integers use rejection on the
// top bits so the result is unbiased.
class Rng {
 public:
  using result_type = std::uint64_t;

  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit Rng(std::uint64_t seed = 0) : key_(seed) {}

  static constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Independent child stream, e.g. one per instance ordinal or worker.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    return Rng(derive_seed(seed, stream_id));
  }
  static constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id) {
    return mix64(seed ^ mix64(stream_id + kGamma));
  }

  std::uint64_t next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGamma);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n >= 1.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return r % n;
  }

  // Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  std::uint64_t seed() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  // UniformRandomBitGenerator surface, for std::shuffle and friends.
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace vrprl
