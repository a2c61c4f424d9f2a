#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace woundstage {

// Deterministic random source. Everything that draws randomness in this
// project goes through this class so that results are reproducible across
// platforms and standard library versions. std::shuffle and the std
// distributions are implementation-defined, which is why they are avoided.
//
// Core generator: splitmix64. Small state, passes BigCrush when used like
// this, and trivially seedable.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    // Uniform integer in [0, n). n must be > 0. Uses rejection to avoid
    // modulo bias.
    std::uint64_t below(std::uint64_t n) {
        std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Box-Muller. No caching of the second deviate so a
    // single call always consumes exactly two u01 draws.
    double normal() {
        double u1 = u01();
        double u2 = u01();
        // u1 == 0 would blow up the log; nudge to the smallest draw instead.
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // Fisher-Yates. Unbiased given `below` is unbiased.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent child stream. Mixes the tag through one splitmix64 round of
    // a copy so forks with different tags diverge immediately.
    Rng fork(std::uint64_t tag) const {
        Rng child(state_ ^ (0x9e3779b97f4a7c15ull * (tag + 1)));
        child.next_u64();
        return child;
    }

  private:
    std::uint64_t state_;
};

}  // namespace woundstage
