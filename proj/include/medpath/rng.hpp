#pragma once

#include <cstdint>
#include <random>

namespace medpath {

// splitmix64 step, used to derive independent per-replicate seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(mix64(seed) ^ mix64(index + 0x517cc1b727220a95ULL));
}

using Rng = std::mt19937_64;

} // namespace medpath
