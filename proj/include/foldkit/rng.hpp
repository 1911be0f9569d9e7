#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>

namespace foldkit {

namespace detail {

// splitmix64 finalizer; used for seeding and stream derivation.
inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline uint64_t rotl(uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// Deterministic random stream (xoshiro256++). The standard library engines
// are portable but its distributions are not, so all draws are implemented
// here and pinned for reproducibility. Streams derived from the same seed
// with different stream ids are statistically independent, which is what
// dataset generation and the benchmark rely on for order-independent
// parallelism.
class RandomStream {
  public:
    explicit RandomStream(uint64_t seed, uint64_t stream = 0) {
        uint64_t z = detail::mix64(seed ^ detail::mix64(stream * 0x9e3779b97f4a7c15ull + 1));
        for (auto& word : state_) {
            z = detail::mix64(z);
            word = z;
        }
    }

    // Derive an independent child stream, e.g. one per dataset sample.
    RandomStream fork(uint64_t stream) const {
        return RandomStream(state_[0] ^ detail::mix64(state_[3]), stream);
    }

    uint64_t next_u64() {
        uint64_t* s = state_;
        const uint64_t result = detail::rotl(s[0] + s[3], 23) + s[0];
        const uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = detail::rotl(s[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Uniform integer in [0, n). Lemire multiply-shift; the modulo bias is
    // below 2^-64 and irrelevant here, what matters is determinism.
    uint64_t uniform_int(uint64_t n) {
        return static_cast<uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Box-Muller; computes a fresh pair per call and discards the sine leg
    // so the stream state never depends on call history.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
    }

    bool bernoulli(double p) {
        return uniform() < p;
    }

    std::array<uint64_t, 4> state() const {
        return {state_[0], state_[1], state_[2], state_[3]};
    }

    void restore(const std::array<uint64_t, 4>& s) {
        for (int i = 0; i < 4; ++i) state_[i] = s[size_t(i)];
    }

  private:
    uint64_t state_[4];
};

// Stream id used for sample i of a generation run with the given seed.
inline uint64_t sample_stream_id(uint64_t index) {
    return 0x100000000ull + index;
}

}  // namespace foldkit
