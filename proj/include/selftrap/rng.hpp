#pragma once

// Deterministic random number generation.  The standard library's
// distributions are implementation-defined, so reproducible outputs require
// hand-rolled sampling on top of a fixed-algorithm engine.  We use
// xoshiro256** seeded through splitmix64; trajectory k of a run with master
// seed m draws from an independent stream derived from (m, k).

#include <cmath>
#include <cstdint>

namespace selftrap {

// splitmix64 step: advances the state and returns the next 64-bit output.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64_next(sm);
    }

    // Independent stream for one trajectory of a seeded ensemble.
    static Rng for_trajectory(std::uint64_t master_seed, std::uint64_t index) {
        std::uint64_t sm = master_seed;
        std::uint64_t a = splitmix64_next(sm);
        // Mix the index through a second splitmix pass so neighbouring
        // trajectories do not share low-entropy seeds.
        std::uint64_t im = index + 0x9E3779B97F4A7C15ULL;
        return Rng(a ^ splitmix64_next(im));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe as a log() argument.
    double uniform_positive() { return 1.0 - uniform(); }

    // Standard normal via the Marsaglia polar method (pairs are cached).
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u, v, r2;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            r2 = u * u + v * v;
        } while (r2 >= 1.0 || r2 == 0.0);
        const double scale = std::sqrt(-2.0 * std::log(r2) / r2);
        cached_ = v * scale;
        have_cached_ = true;
        return u * scale;
    }

    // Exponential waiting time with the given rate (events per unit time).
    double exponential(double rate) { return -std::log(uniform_positive()) / rate; }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace selftrap
