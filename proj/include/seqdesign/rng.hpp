#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace seqdesign {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Child seed for a path such as {trial, stage, stream}. Children of distinct
/// paths are independent for practical purposes and do not depend on the
/// order in which they are requested.
inline std::uint64_t split_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = mix64(seed);
    for (std::uint64_t step : path) h = mix64(h ^ mix64(step + 0x632be59bd9b4e019ULL));
    return h;
}

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    return Rng(split_seed(seed, path));
}

// Stream tags below the stage level.
enum Stream : std::uint64_t {
    kSelectionStream = 1,
    kResponseStream = 2,
    kPretestStream = 3,
    kFinalStream = 4,
};

}  // namespace seqdesign
