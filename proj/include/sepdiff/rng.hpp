#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace sepdiff {

// Counter-based deterministic random streams. Every draw is a pure function
// of (seed, stream, counter), so adding or reordering consumers never
// perturbs the values another consumer sees, and runs are reproducible
// across platforms (no std::*_distribution involved).

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::string_view stream_name)
        : key_(detail::splitmix64(seed ^ detail::fnv1a64(stream_name))) {}

    // Uniform in (0, 1]; never returns 0 so log() is safe.
    double uniform(std::uint64_t counter) const {
        const std::uint64_t bits = value(counter);
        return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller on two derived uniforms.
    double normal(std::uint64_t counter) const {
        const double u1 = uniform(counter * 2);
        const double u2 = uniform(counter * 2 + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    void fill_normal(std::uint64_t counter_base, std::span<double> out) const {
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = normal(counter_base + i);
        }
    }

    std::vector<double> normal_vector(std::uint64_t counter_base, std::size_t n) const {
        std::vector<double> v(n);
        fill_normal(counter_base, v);
        return v;
    }

    double uniform_in(std::uint64_t counter, double lo, double hi) const {
        return lo + (hi - lo) * uniform(counter);
    }

    std::uint64_t value(std::uint64_t counter) const {
        return detail::splitmix64(key_ ^ detail::splitmix64(counter));
    }

private:
    std::uint64_t key_;
};

// Packs (timestep, track, element) into one counter. Bounds: t < 2^20,
// track < 2^12, element < 2^32 -- far beyond anything the solvers use.
inline std::uint64_t step_counter(int t, int track, std::uint64_t element = 0) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t)) << 44) |
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(track) & 0xfff) << 32) |
           (element & 0xffffffffULL);
}

}  // namespace sepdiff
