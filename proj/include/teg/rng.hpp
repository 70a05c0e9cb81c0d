#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace teg {

using Rng = std::mt19937_64;

inline Rng makeRng(std::uint64_t seed) { return Rng(seed); }

// Derive an independent stream from a parent seed and a stream id.
inline std::uint64_t deriveSeed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 over the pair
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::string serializeRng(const Rng& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

inline Rng deserializeRng(const std::string& text) {
    Rng rng;
    std::istringstream is(text);
    is >> rng;
    return rng;
}

}  // namespace teg
