#pragma once

#include <cstdint>
#include <limits>

namespace cmpplab {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based random stream. The n-th output is mix64(key + n * golden),
/// so a stream is fully described by its key and how many values it has
/// handed out. Satisfies UniformRandomBitGenerator.
class RngStream {
 public:
  using result_type = std::uint64_t;

  constexpr explicit RngStream(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t draws() const noexcept { return counter_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// The three disjoint streams a single path reads from. Claims never share a
/// stream with the mixing draw or the interarrival times.
struct PathStreams {
  RngStream mixing;
  RngStream interarrival;
  RngStream claims;
};

/// Derives per-path substreams from a master seed. `domain` separates
/// independent ensembles built from the same seed (test vs. calibration).
class StreamFactory {
 public:
  constexpr explicit StreamFactory(std::uint64_t master_seed,
                                   std::uint64_t domain = 0) noexcept
      : base_(mix64(mix64(master_seed) ^ mix64(domain + 0x5851f42d4c957f2dULL))) {}

  constexpr PathStreams for_path(std::uint64_t path_index) const noexcept {
    const std::uint64_t path_key = mix64(base_ ^ mix64(path_index + 1));
    return PathStreams{RngStream(mix64(path_key + 1)),
                       RngStream(mix64(path_key + 2)),
                       RngStream(mix64(path_key + 3))};
  }

  /// A stream not tied to any path, for experiments that just need draws.
  constexpr RngStream auxiliary(std::uint64_t index) const noexcept {
    return RngStream(mix64(base_ + 0xd1b54a32d192ed03ULL * (index + 1)));
  }

 private:
  std::uint64_t base_;
};

}  // namespace cmpplab
