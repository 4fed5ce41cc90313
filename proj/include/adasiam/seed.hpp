#pragma once

#include <cstdint>

namespace adasiam {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream per (run seed, frame, purpose).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t frame, std::uint64_t purpose) {
  return splitmix64(splitmix64(splitmix64(seed) ^ frame) ^ purpose);
}

}  // namespace adasiam
