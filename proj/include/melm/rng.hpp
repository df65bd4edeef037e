#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

namespace melm {

// splitmix64 finalizer, used to spread raw seed material.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Child seed for a work unit, e.g. derive_seed(master, {sentence, round}).
// Parallel workers drawing from per-unit streams reproduce serial output.
inline uint64_t derive_seed(uint64_t master, std::initializer_list<uint64_t> parts) {
    uint64_t s = mix64(master);
    for (uint64_t p : parts) s = mix64(s ^ mix64(p));
    return s;
}

// Deterministic random stream. All reductions (index, real, gaussian) are
// implemented here rather than via std::*_distribution, whose output is
// not pinned by the standard and varies across library implementations.
class RandomStream {
public:
    explicit RandomStream(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53 random bits.
    double uniform_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Unbiased uniform index in [0, n); n >= 1.
    std::size_t uniform_index(std::size_t n) {
        const uint64_t bound = static_cast<uint64_t>(n);
        const uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const uint64_t r = next_u64();
            const unsigned __int128 m = static_cast<unsigned __int128>(r) * bound;
            if (static_cast<uint64_t>(m) >= threshold)
                return static_cast<std::size_t>(m >> 64);
        }
    }

    bool bernoulli(double p) { return uniform_real() < p; }

    // Box-Muller with a cached spare.
    double gaussian(double mean, double sigma) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + spare_ * sigma;
        }
        const double u = 1.0 - uniform_real();  // (0, 1], keeps the log finite
        const double v = uniform_real();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double a = 6.283185307179586 * v;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return mean + r * std::cos(a) * sigma;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[uniform_index(i)]);
    }

    // n distinct indices from [0, total), ascending. Partial Fisher-Yates.
    std::vector<std::size_t> sample_indices(std::size_t total, std::size_t n) {
        std::vector<std::size_t> idx(total);
        for (std::size_t i = 0; i < total; ++i) idx[i] = i;
        for (std::size_t i = 0; i < n && i + 1 < total; ++i)
            std::swap(idx[i], idx[i + uniform_index(total - i)]);
        idx.resize(n);
        std::sort(idx.begin(), idx.end());
        return idx;
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace melm
