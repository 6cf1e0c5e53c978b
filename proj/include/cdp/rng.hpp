#pragma once

#include <cstdint>
#include <random>

namespace cdp {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based stream split: the seed for item `index` of stream `stream`
// depends only on (master, stream, index).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index) {
  return splitmix64(splitmix64(master ^ splitmix64(stream)) + index);
}

namespace streams {
inline constexpr std::uint64_t kInstance = 1;
inline constexpr std::uint64_t kDod = 2;
inline constexpr std::uint64_t kEpisode = 3;
inline constexpr std::uint64_t kTraining = 4;
inline constexpr std::uint64_t kHeldOut = 5;
inline constexpr std::uint64_t kNetInit = 6;
inline constexpr std::uint64_t kBatches = 7;
inline constexpr std::uint64_t kLayout = 8;
inline constexpr std::uint64_t kInstancePick = 9;
}  // namespace streams

}  // namespace cdp
