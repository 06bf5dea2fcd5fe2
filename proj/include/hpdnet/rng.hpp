#ifndef HPDNET_RNG_HPP
#define HPDNET_RNG_HPP

#include <cmath>
#include <cstdint>

namespace hpdnet {

// Splitmix64 generator. Used everywhere instead of <random> engines and
// distributions so that streams are bit-identical across standard library
// implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in {0, ..., n-1}; n must be positive.
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Standard normal pair via Box-Muller.
    void next_normal_pair(double& n0, double& n1) {
        const double u1 = 1.0 - next_double();  // (0, 1]
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 6.283185307179586476925286766559 * u2;
        n0 = r * std::cos(t);
        n1 = r * std::sin(t);
    }

    double next_normal() {
        double a, b;
        next_normal_pair(a, b);
        return a;
    }

private:
    std::uint64_t state_;
};

// Derives an independent stream for a tagged substream of a master seed.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t tag) {
    Rng mix(seed ^ (0xD1B54A32D192ED03ull * (tag + 1)));
    return mix.next_u64();
}

}  // namespace hpdnet

#endif  // HPDNET_RNG_HPP
