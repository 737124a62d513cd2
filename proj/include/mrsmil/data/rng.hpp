#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mrsmil::data {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed of the named sub-stream `name`/`index` under a root seed. Streams
/// with different names or indices are statistically independent.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view name, std::uint64_t index = 0) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return splitmix64(splitmix64(root ^ h) + index);
}

inline Rng make_stream(std::uint64_t root, std::string_view name, std::uint64_t index = 0) {
  return Rng(derive_seed(root, name, index));
}

}  // namespace mrsmil::data
