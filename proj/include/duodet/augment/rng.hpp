#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace duodet {

/// SplitMix64 finalizer; stable across platforms and compilers.
inline std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t stable_hash(std::uint64_t global_seed, std::uint64_t epoch, std::uint64_t index)
{
    return mix64(mix64(mix64(global_seed) ^ epoch) ^ index);
}

/// Random stream keyed by (global_seed, epoch, sample_index). Distributions are
/// implemented here rather than with <random>'s adaptors so draw sequences are
/// identical across standard libraries.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}
    RngStream(std::uint64_t global_seed, std::uint64_t epoch, std::uint64_t index)
        : RngStream(stable_hash(global_seed, epoch, index))
    {
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi].
    int uniform_int(int lo, int hi)
    {
        const auto span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo + 1);
        return lo + static_cast<int>(engine_() % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller (one value per call, no caching).
    double normal()
    {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}   // namespace duodet
