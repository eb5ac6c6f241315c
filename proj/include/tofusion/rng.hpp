#pragma once

#include <cmath>
#include <cstdint>

namespace tofusion {

// Counter-based PRNG: every draw is a pure function of (seed, stream, counter),
// so per-pixel noise is independent of evaluation order and thread schedule.
namespace rng {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    return mix64(mix64(mix64(seed) ^ stream) ^ counter);
}

// Uniform in [0, 1) with 53-bit mantissa.
inline double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    return static_cast<double>(hash(seed, stream, counter) >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller; counters 2k and 2k+1 feed draw k.
inline double gaussian(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    const double u1 = uniform(seed, stream, 2 * counter);
    const double u2 = uniform(seed, stream, 2 * counter + 1);
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return r * std::cos(2.0 * M_PI * u2);
}

}  // namespace rng

// Sequential convenience stream for scene/parameter sampling.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream) {}

    double uniform() { return rng::uniform(seed_, stream_, counter_++); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double gaussian() { return rng::gaussian(seed_, stream_, counter_++); }

    // Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo + 1);
        return lo + static_cast<std::int64_t>(rng::hash(seed_, stream_, counter_++) % span);
    }

    std::uint64_t next_u64() { return rng::hash(seed_, stream_, counter_++); }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

}  // namespace tofusion
