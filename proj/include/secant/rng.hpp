#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace secant {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of replica k; independent of how replicas are scheduled.
inline std::uint64_t replica_seed(std::uint64_t master, std::uint64_t k) {
    return splitmix64(splitmix64(master) ^ splitmix64(k + 0x632be59bd9b4e019ULL));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32)};
    return Engine(seq);
}

/// Uniform on the open interval (0, 1).
inline double uniform01(Engine& eng) {
    return (double(eng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double exponential(Engine& eng, double rate) {
    return -std::log(uniform01(eng)) / rate;
}

inline std::uint64_t poisson(Engine& eng, double mean) {
    if (mean <= 0) return 0;
    std::poisson_distribution<std::uint64_t> d(mean);
    return d(eng);
}

} // namespace secant
