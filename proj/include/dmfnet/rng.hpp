#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace dmfnet {

/// splitmix64 finalizer; used to derive independent stream seeds.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) { return mix64(mix64(a) ^ (b + 0x9e3779b97f4a7c15ULL)); }
inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) { return mix_seed(mix_seed(a, b), c); }

/// Seeded generator with a fully specified output sequence. mt19937 is pinned
/// by the standard; the Gaussian uses an explicit Box-Muller so results do not
/// depend on the library's normal_distribution implementation.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(static_cast<uint32_t>(mix64(seed))) {}

    uint32_t next_u32() { return gen_(); }

    /// Uniform in (0,1).
    double uniform() { return (static_cast<double>(gen_()) + 0.5) * (1.0 / 4294967296.0); }

    double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be >= 1.
    uint32_t uniform_int(uint32_t n) { return gen_() % n; }

    /// Standard normal via Box-Muller (trig form, pair-cached).
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::mt19937 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Fisher-Yates with an explicit index draw, so shuffles are identical on
/// every platform (std::shuffle's sequence is implementation-defined).
template <typename T>
void portable_shuffle(std::vector<T>& items, Rng& rng) {
    for (size_t i = items.size(); i > 1; --i) {
        size_t j = rng.uniform_int(static_cast<uint32_t>(i));
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace dmfnet
