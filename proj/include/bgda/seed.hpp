#pragma once

#include <cstdint>

namespace bgda {

// Stream s of master seed m is the (s+1)-th output of splitmix64 started at m.
// Streams used by the library:
//   0 network initialisation, 1 interior collocation, 2 + k boundary operator k,
//   100 mini-batch sampling, 101 synthetic instance, 102 gradient noise.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t state = master + stream * 0x9E3779B97F4A7C15ULL;
  return splitmix64(state);
}

namespace streams {
inline constexpr std::uint64_t kNetwork = 0;
inline constexpr std::uint64_t kInterior = 1;
inline constexpr std::uint64_t kBoundaryBase = 2;
inline constexpr std::uint64_t kBatch = 100;
inline constexpr std::uint64_t kInstance = 101;
inline constexpr std::uint64_t kNoise = 102;
}  // namespace streams

}  // namespace bgda
