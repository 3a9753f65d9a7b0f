#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dechist {

// splitmix64: used both as a stream-splitting hash and to seed mt19937_64.
// One top-level seed fans out into independent substreams keyed by
// (label, index) so adding a consumer never perturbs existing streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t substream_seed(std::uint64_t root, std::string_view label,
                                    std::uint64_t index = 0) {
  return splitmix64(splitmix64(root ^ fnv1a(label)) + index);
}

inline std::mt19937_64 make_engine(std::uint64_t root, std::string_view label,
                                   std::uint64_t index = 0) {
  return std::mt19937_64(substream_seed(root, label, index));
}

}  // namespace dechist
