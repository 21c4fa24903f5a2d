#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace vicsfm {

/// Deterministic pseudo-random generator (splitmix64 core). All randomized
/// algorithms in the library draw from this so that results are reproducible
/// bit-for-bit across platforms and standard-library versions; std::mt19937
/// is avoided because the std distributions are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection sampling keeps the distribution exact.
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    /// Standard normal via Box-Muller.
    double gaussian() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

private:
    std::uint64_t state_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

/// Stateless integer hash, used for procedural textures. Mixes all inputs
/// through splitmix64 finalization.
inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Hash of lattice coordinates to [0, 1).
inline double lattice_noise(std::uint64_t seed, std::int64_t x, std::int64_t y,
                            std::int64_t z = 0) {
    std::uint64_t h = hash_combine(seed, static_cast<std::uint64_t>(x) * 0x8da6b343ULL);
    h = hash_combine(h, static_cast<std::uint64_t>(y) * 0xd8163841ULL);
    h = hash_combine(h, static_cast<std::uint64_t>(z) * 0xcb1ab31fULL);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace vicsfm
