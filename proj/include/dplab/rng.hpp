// Counter-based random streams: every draw is a pure function of
// (seed, lane, stream id, counter), so coupled runs across widths and
// variants can replay identical randomness in any order.
#pragma once

#include <cmath>
#include <cstdint>

namespace dplab::rng {

// splitmix64 finalizer (Vigna); full-avalanche 64-bit mix.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Keyed counter hash: chains the mix over the key words.
inline std::uint64_t keyed(std::uint64_t seed, std::uint64_t lane,
                           std::uint64_t a, std::uint64_t b,
                           std::uint64_t c = 0) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ lane);
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    h = mix64(h ^ c);
    return h;
}

// Stream lanes; disjoint purposes never share draws.
enum class Lane : std::uint64_t {
    Init = 1,
    Mask = 2,
    MaskTilde = 3,
    JumpSelect = 4,
    JumpClock = 5,
    Thinning = 6,
    CriticalPoisson = 7,
    CriticalSample = 8,
    SlicedDirection = 9,
    TeacherData = 10,
    TeacherWeights = 11,
    Sampling = 12,
};

// Uniform in [0,1) with 53-bit resolution, never exactly 1.
inline double uniform(std::uint64_t seed, Lane lane, std::uint64_t a,
                      std::uint64_t b, std::uint64_t c = 0) {
    return static_cast<double>(keyed(seed, static_cast<std::uint64_t>(lane), a, b, c) >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller on two counter slots (c, c+1 reserved).
inline double gaussian(std::uint64_t seed, Lane lane, std::uint64_t a,
                       std::uint64_t b, std::uint64_t c) {
    const double u1 = uniform(seed, lane, a, b, 2 * c);
    const double u2 = uniform(seed, lane, a, b, 2 * c + 1);
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
}

// Exponential with the given mean.
inline double exponential(std::uint64_t seed, Lane lane, std::uint64_t a,
                          std::uint64_t b, std::uint64_t c, double mean) {
    return -mean * std::log1p(-uniform(seed, lane, a, b, c));
}

// Poisson by inversion (sequential search). The CDF is accumulated in log
// space so large means (where exp(-mean) underflows) stay correct.
inline long poisson(std::uint64_t seed, Lane lane, std::uint64_t a,
                    std::uint64_t b, std::uint64_t c, double mean) {
    const double logu = std::log(uniform(seed, lane, a, b, c));
    double logp = -mean;     // log pmf at k = 0
    double logcdf = logp;
    long k = 0;
    while (logu >= logcdf && k < 1000000) {
        ++k;
        logp += std::log(mean / static_cast<double>(k));
        logcdf += std::log1p(std::exp(logp - logcdf));
    }
    return k;
}

}  // namespace dplab::rng
