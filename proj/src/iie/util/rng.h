#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace iie {

// Deterministic RNG used everywhere seeds matter. mt19937_64 output is pinned
// by the standard; the distributions are hand-rolled because the std ones are
// implementation-defined and would break bit-reproducibility across stdlibs.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Modulo bias is irrelevant here (n << 2^64);
    // what matters is that the sequence is fixed.
    uint64_t uniform_int(uint64_t n) { return eng_() % n; }

    // Standard normal via Box-Muller, one value per call (cached pair).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Derive an independent stream (e.g. per seed index) without correlating
    // the parent sequence.
    Rng fork(uint64_t salt) {
        return Rng(eng_() ^ (salt * 0x9e3779b97f4a7c15ULL + 0x243f6a8885a308d3ULL));
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace iie
