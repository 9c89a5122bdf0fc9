#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "har/core/tensor.hpp"

namespace har {

/// Seeded PRNG with self-contained uniform/normal transforms so that
/// sequences are reproducible across standard libraries. Normal draws use
/// Box-Muller with a cached spare.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    /// Derive an independent stream for a sub-task (splitmix64 of seed ^ tag).
    static uint64_t derive(uint64_t seed, uint64_t tag) {
        uint64_t z = seed ^ (tag + 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    uint64_t next_u64() { return eng_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive, rejection-free for small ranges.
    int uniform_int(int lo, int hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(eng_() % span);
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void fill_uniform(TensorT<T>& t, double lo, double hi) {
        for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(uniform(lo, hi));
    }

    template <typename T>
    void fill_normal(TensorT<T>& t, double mean = 0.0, double stddev = 1.0) {
        for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(mean + stddev * normal());
    }

    /// Fisher-Yates shuffle.
    template <typename V>
    void shuffle(V& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(eng_() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace har
