#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace driveval {

/// 64-bit FNV-1a over raw bytes. Used for config hashes and stream names.
std::uint64_t fnv1a(std::string_view bytes,
                    std::uint64_t basis = 0xcbf29ce484222325ULL);

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Named sub-stream seed: every random draw in the pipeline derives from
/// (master seed, component name, index) through this function.
std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::uint64_t index = 0);

std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::uint64_t index, std::uint64_t sub_index);

/// Small counter-style generator. Cheap to construct, so per-step streams
/// (seed, episode, step) can be created on the fly.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

using Engine = std::mt19937_64;

}  // namespace driveval
