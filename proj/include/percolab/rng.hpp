#pragma once

#include <array>
#include <cstdint>

namespace percolab::rng {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// Stateless: the output block is a pure function of (counter, key).

using Counter = std::array<uint32_t, 4>;
using Key = std::array<uint32_t, 2>;

inline constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

inline Counter philox4x32_10(Counter ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    const uint64_t p0 = static_cast<uint64_t>(kPhiloxM0) * ctr[0];
    const uint64_t p1 = static_cast<uint64_t>(kPhiloxM1) * ctr[2];
    const auto hi0 = static_cast<uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<uint32_t>(p0);
    const auto hi1 = static_cast<uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Independent streams derived from one user seed.
enum class Stream : uint64_t {
  sites = 0,
  signs = 1,
  aux = 2,
};

inline Key make_key(uint64_t seed, Stream stream) {
  const uint64_t k = stream == Stream::sites ? seed : splitmix64(seed ^ splitmix64(static_cast<uint64_t>(stream)));
  return {static_cast<uint32_t>(k), static_cast<uint32_t>(k >> 32)};
}

/// 128 random bits for (block, replica) under `key`, as two 64-bit words.
inline std::array<uint64_t, 2> block128(Key key, uint64_t block, uint64_t replica) {
  const Counter c = philox4x32_10(
      {static_cast<uint32_t>(block), static_cast<uint32_t>(block >> 32),
       static_cast<uint32_t>(replica), static_cast<uint32_t>(replica >> 32)},
      key);
  return {static_cast<uint64_t>(c[0]) | (static_cast<uint64_t>(c[1]) << 32),
          static_cast<uint64_t>(c[2]) | (static_cast<uint64_t>(c[3]) << 32)};
}

/// The 64-bit random word number `word` of replica `replica`.
inline uint64_t word64(Key key, uint64_t word, uint64_t replica) {
  return block128(key, word >> 1, replica)[word & 1];
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double to_unit(uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

}  // namespace percolab::rng
