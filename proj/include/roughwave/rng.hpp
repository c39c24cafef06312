#pragma once

#include <cstdint>
#include <random>

namespace roughwave {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream seed for one (replica, level) pair:
//   splitmix64(master ^ splitmix64(replica ^ splitmix64(level ^ salt)))
// Any change here changes every simulated path, so it is versioned by the
// manifest's seed_lineage string.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replica, std::uint64_t level,
                                 std::uint64_t salt = 0x5157u) {
  return splitmix64(master ^ splitmix64(replica ^ splitmix64(level ^ salt)));
}

inline constexpr const char* kSeedLineage =
    "mt19937_64 per (replica, level); seed = splitmix64(master ^ splitmix64(replica ^ "
    "splitmix64(level ^ salt))); normals via std::normal_distribution";

using Engine = std::mt19937_64;

}  // namespace roughwave
