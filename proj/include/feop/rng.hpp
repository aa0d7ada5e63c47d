#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace feop {

// Deterministic RNG. mt19937_64 has a standard-specified output sequence and
// the transforms below are written out explicitly, so streams reproduce
// bit-for-bit across compilers and platforms (std::*_distribution would not).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; two uniforms per draw, no caching.
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Uniform integer in [0, n). Rejection-free modulo bias is negligible for
    // the index ranges used here, but keep it exact anyway.
    std::size_t index(std::size_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % n);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace feop
