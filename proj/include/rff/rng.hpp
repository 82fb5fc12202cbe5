#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string_view>

namespace rff {

// splitmix64 step; good enough to whiten seed material.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent sub-seed from a master seed and a stream tag.
// Every stage of the pipeline gets its own stream so that adding draws to
// one stage never shifts another.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the tag bytes
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(master ^ splitmix64(h));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::uint64_t index) {
    return splitmix64(derive_seed(master, tag) ^ splitmix64(index * 0x9e3779b97f4a7c15ULL + 1));
}

// Deterministic random stream. mt19937_64 output is specified by the
// standard; the distribution transforms below are our own, so sequences are
// identical across compilers and standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t raw() { return gen_(); }

    // [0, 1) with 53 random bits
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; draws two uniforms per sample, no state carried over.
    double normal() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 == 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Circularly symmetric complex Gaussian with total variance `var`.
    std::complex<double> cnormal(double var = 1.0) {
        const double s = std::sqrt(var / 2.0);
        return {s * normal(), s * normal()};
    }

    // Unbiased integer in [0, n)
    std::uint64_t integer(std::uint64_t n) {
        const std::uint64_t bound = n * ((~std::uint64_t{0}) / n);
        std::uint64_t v;
        do {
            v = gen_();
        } while (v >= bound);
        return v % n;
    }

    Rng fork(std::string_view tag) { return Rng(derive_seed(gen_(), tag)); }

private:
    std::mt19937_64 gen_;
};

}  // namespace rff
