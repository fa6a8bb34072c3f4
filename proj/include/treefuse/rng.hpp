#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace treefuse {

// 64-bit finalizer (splitmix64). Used both as the PRNG step and as the
// stream-derivation hash, so every (seed, id...) tuple maps to an
// independent stream without any shared mutable state.
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

// Small, fast engine; satisfies UniformRandomBitGenerator.
class SplitMix64 {
  public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

  private:
    std::uint64_t state_;
};

// Derive a child seed from a parent seed and one or more identifiers
// (trial index, node id, purpose tag, ...). Pure function of its inputs,
// so streams can be created in any order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t id) {
    return mix64(seed ^ (0x9e3779b97f4a7c15ULL * (id + 0x632be59bd9b4e019ULL)));
}

template <typename... Ids>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t id, Ids... rest) {
    return derive_seed(derive_seed(seed, id), static_cast<std::uint64_t>(rest)...);
}

// Uniform double in [0, 1), 53 random bits, exactly one engine draw.
template <typename Rng>
double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform index in [0, n). Consumes exactly one engine draw; the modulo
// bias is < n / 2^64 and irrelevant for the small n used here.
template <typename Rng>
std::size_t uniform_index(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(n));
}

// Box-Muller, two engine draws per call. Hand-rolled so trial streams are
// pinned by this library rather than by the standard library's
// implementation-defined normal_distribution.
template <typename Rng>
double normal_sample(Rng& rng, double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace treefuse
