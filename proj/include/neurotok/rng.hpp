#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace neurotok {

using Rng = std::mt19937_64;

// Distinct deterministic streams derived from one user seed, so that e.g. the
// sampler and the weight initializer consume independent sequences and a mode
// switch that changes one consumer does not shift the others.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return Rng(z ^ (z >> 31));
}

inline int uniform_int(Rng& rng, int lo, int hi) {  // inclusive bounds
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline std::int64_t uniform_i64(Rng& rng, std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double normal(Rng& rng, double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(rng);
}

// k distinct values from {0, ..., n-1}, order randomized (partial Fisher-Yates).
inline std::vector<int> sample_without_replacement(Rng& rng, int n, int k) {
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < k; ++i) {
        std::swap(pool[i], pool[uniform_int(rng, i, n - 1)]);
    }
    pool.resize(k);
    return pool;
}

}  // namespace neurotok
