#pragma once

// Counter-based deterministic RNG. Every stream is keyed by (seed, realization,
// shot); draws are a pure function of (key, counter), so any subset of the
// Monte Carlo pipeline can be recomputed independently and reruns are
// bit-identical regardless of evaluation order.

#include <cstdint>

namespace rydssh::rng {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t key_from(std::uint64_t seed, std::uint64_t realization, std::uint64_t shot) {
    std::uint64_t k = mix64(seed);
    k = mix64(k ^ (0xa0761d6478bd642full + realization));
    k = mix64(k ^ (0xe7037ed1a0b428dbull + shot));
    return k;
}

class stream {
  public:
    stream(std::uint64_t seed, std::uint64_t realization = 0, std::uint64_t shot = 0)
        : key_(key_from(seed, realization, shot)) {}

    std::uint64_t next_u64() { return mix64(key_ ^ (counter_++ * 0x9e3779b97f4a7c15ull)); }

    // uniform in [0, 1) with 53-bit resolution
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return next_unit() < p; }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace rydssh::rng
