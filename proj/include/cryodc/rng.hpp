#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cryodc {

/// SplitMix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

/// Seeded random stream. Normal variates are produced with Box-Muller on
/// top of mt19937_64 so trajectories do not depend on the standard
/// library's distribution implementations.
class RandomStream {
public:
    RandomStream() : RandomStream(0) {}
    explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    void reseed(std::uint64_t seed) {
        seed_ = seed;
        engine_.seed(seed);
        has_spare_ = false;
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Zero-mean normal with standard deviation `sigma`, rejected outside
    /// +-`cutoff` standard deviations.
    double truncated_normal(double sigma, double cutoff = 4.0) {
        if (sigma <= 0.0) return 0.0;
        double z = 0.0;
        do {
            z = normal();
        } while (std::abs(z) > cutoff);
        return sigma * z;
    }

    bool operator==(const RandomStream&) const = default;

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace cryodc
