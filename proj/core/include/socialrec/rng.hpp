#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace socialrec {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a(std::string_view bytes) noexcept;

/// Independent random stream derived from a root seed, a stream name and an index.
/// Streams never share state, so turning a stage off does not shift the draws of another.
Rng make_rng(std::uint64_t root_seed, std::string_view stream, std::uint64_t index = 0);

/// Uniform draw in [0, 1).
inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

/// Uniform integer in [lo, hi].
inline std::uint64_t uniform_int(Rng& rng, std::uint64_t lo, std::uint64_t hi) {
  return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

}  // namespace socialrec
