#pragma once

#include <cmath>
#include <cstdint>

namespace priornet {

// splitmix64 finalizer; the whole generator is built out of this.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return mix64(a * 0xd6e8feb86659fd93ull + mix64(b));
}

// Counter-based generator: every draw is a pure function of (key, counter),
// so generation order and threading cannot change the stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(mix64(seed)) {}
    Rng(std::uint64_t seed, std::uint64_t stream) : key_(hash_combine(mix64(seed), stream)) {}

    std::uint64_t next_u64() { return mix64(key_ ^ (0xa0761d6478bd642full + counter_++)); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // standard normal via Box-Muller
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

} // namespace priornet
