#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Dense>

namespace rrl {

/// splitmix64 output function; also used to expand seeds.
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based seed derivation: the i-th value of the splitmix64 stream
/// started at `master`. Runs derived from distinct counters never share state.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
    return splitmix64(master + counter * 0x9e3779b97f4a7c15ULL);
}

/// xoshiro256++ generator. Self-contained so that streams are reproducible
/// bit-for-bit across platforms and standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t z = seed;
        for (auto& word : state_) {
            z += 0x9e3779b97f4a7c15ULL;
            std::uint64_t w = z;
            w = (w ^ (w >> 30)) * 0xbf58476d1ce4e5b9ULL;
            w = (w ^ (w >> 27)) * 0x94d049bb133111ebULL;
            word = w ^ (w >> 31);
        }
    }

    static Rng split(std::uint64_t master, std::uint64_t counter) {
        return Rng(derive_seed(master, counter));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Index drawn from an unnormalized nonnegative weight vector.
    template <typename Derived>
    int categorical(const Eigen::DenseBase<Derived>& weights) {
        const int n = static_cast<int>(weights.size());
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += weights(i);
        double u = next_double() * total;
        for (int i = 0; i < n; ++i) {
            u -= weights(i);
            if (u < 0.0) return i;
        }
        return n - 1;  // guards against accumulated rounding
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
};

}  // namespace rrl
