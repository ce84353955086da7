#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mtopt {

// Deterministic RNG wrapper. std::mt19937_64 output is pinned by the
// standard, but the distribution adapters are not, so the draw functions
// below are implemented directly on the raw 64-bit stream.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n) {
        // Rejection-free modulo bias is negligible for desk-scale n,
        // but use Lemire-style multiply-shift anyway.
        __uint128_t m = static_cast<__uint128_t>(gen_()) * n;
        return static_cast<uint64_t>(m >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller (polar form avoided to keep the
    // consumption of the stream fixed at two draws per call).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Derive an independent stream, e.g. one per worker or per episode.
    Rng fork(uint64_t salt) {
        uint64_t s = gen_() ^ (salt * 0x9e3779b97f4a7c15ull);
        return Rng(s);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace mtopt
