#pragma once

#include <cstdint>
#include <random>

namespace stdepth {

// Deterministic random source. Uniform variates are derived from raw
// mt19937_64 output with explicit bit arithmetic rather than
// std::uniform_real_distribution, whose output is implementation-defined;
// results are therefore reproducible across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53 random mantissa bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return engine_() % n; }

    // Seed for an independent stream, e.g. per epoch or per sample.
    static uint64_t derive_seed(uint64_t seed, uint64_t stream) {
        // splitmix64 of the pair; decorrelates nearby seeds.
        uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static Rng derive(uint64_t seed, uint64_t stream) { return Rng(derive_seed(seed, stream)); }

private:
    std::mt19937_64 engine_;
};

}  // namespace stdepth
