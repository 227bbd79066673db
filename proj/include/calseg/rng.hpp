#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace calseg {

// splitmix64 step; used to derive independent per-index streams from one seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(index + 1));
}

// Deterministic RNG: mt19937_64 (sequence pinned by the standard) with
// hand-rolled draws, since std:: distributions are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // unbiased integer in [0, n)
    std::size_t below(std::size_t n) {
        if (n == 0) return 0;
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do { v = engine_(); } while (v >= limit);
        return static_cast<std::size_t>(v % n);
    }

    // standard normal via Box-Muller
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do { u1 = uniform(); } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    // Fisher-Yates with explicit draws so the permutation is engine-pinned.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace calseg
