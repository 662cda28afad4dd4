#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace textgan {

// Deterministic PRNG. Gaussian draws are hand-rolled Box-Muller so that the
// produced streams are identical across standard library implementations;
// std::normal_distribution makes no such guarantee.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    // Independent stream keyed by (seed, tag, index). Used to decouple data
    // generation, parameter init, per-iteration training noise and evaluation
    // so that any one of them can be replayed in isolation.
    static Rng derive(uint64_t seed, std::string_view tag, uint64_t index = 0) {
        uint64_t h = 1469598103934665603ull;
        for (char c : tag) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        return Rng(mix(mix(seed ^ h) + index));
    }

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(gen_() >> 11) * (1.0 / 9007199254740992.0);
    }

    float uniform(float lo, float hi) {
        return lo + static_cast<float>(uniform01()) * (hi - lo);
    }

    // Uniform integer in [lo, hi).
    int uniform_int(int lo, int hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo);
        return lo + static_cast<int>(gen_() % span);
    }

    float normal(float mean, float stddev) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + spare_ * stddev;
        }
        const double u1 = 1.0 - uniform01();  // avoid log(0)
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586 * u2;
        spare_ = static_cast<float>(r * std::sin(theta));
        has_spare_ = true;
        return mean + static_cast<float>(r * std::cos(theta)) * stddev;
    }

private:
    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::mt19937_64 gen_;
    float spare_ = 0.0f;
    bool has_spare_ = false;
};

}  // namespace textgan
