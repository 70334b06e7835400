#pragma once

#include <cstdint>
#include <random>

namespace fedsim {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to build independent streams from (seed, tags).
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic stream derivation: hash(seed, a, b, c). Streams with distinct
// tags are statistically independent regardless of call order.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                      std::uint64_t c = 0) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    h = mix64(h ^ c);
    return Rng(h);
}

// Stream tags for the experiment pipeline.
namespace stream {
inline constexpr std::uint64_t kInit = 0x01;
inline constexpr std::uint64_t kSplit = 0x02;
inline constexpr std::uint64_t kPartition = 0x03;
inline constexpr std::uint64_t kSelect = 0x04;
inline constexpr std::uint64_t kClient = 0x05;
}  // namespace stream

}  // namespace fedsim
