#ifndef NBPS_RNG_HPP
#define NBPS_RNG_HPP

#include <cstdint>

namespace nbps {

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}

/// xoshiro256** generator. Satisfies UniformRandomBitGenerator; all variate
/// code in this library draws from it directly so that streams are
/// bit-reproducible across platforms.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) {
        std::uint64_t z = seed;
        for (auto& word : state_) {
            z = detail::mix64(z);
            word = z;
        }
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type(0); }

    result_type operator()() {
        const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in (0, 1); safe as an argument to log().
    double uniform_pos() {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

private:
    std::uint64_t state_[4];
};

/// Addressable random stream: (seed, stream) pairs identify independent
/// streams. Sampler code derives one stream per logical task -- e.g.
/// (chain, sweep, variable, index) -- so gene-parallel updates produce the
/// same draws regardless of thread schedule.
struct RngHandle {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    RngHandle derive(std::uint64_t a) const {
        return RngHandle{seed, detail::mix64(stream ^ detail::mix64(a))};
    }
    RngHandle derive(std::uint64_t a, std::uint64_t b) const {
        return derive(a).derive(b);
    }
    RngHandle derive(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
        return derive(a).derive(b).derive(c);
    }

    Rng make() const {
        return Rng(detail::mix64(seed) ^ detail::mix64(stream ^ 0x5bf0363db2a96eadULL));
    }
};

}

#endif
