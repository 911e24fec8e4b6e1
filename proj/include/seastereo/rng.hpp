#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace seastereo {

// splitmix64 step; also used as a stateless hash.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + b + (a << 6) + (a >> 2)));
}

inline uint64_t hash_str(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Deterministic, portable RNG. All randomness in the project funnels through
// this type so results are reproducible across runs for a fixed seed.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(splitmix64(seed ^ 0x5851f42d4c957f2dULL)) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be > 0.
    uint64_t next_below(uint64_t n) {
        // Lemire's multiply-shift with rejection; unbiased.
        uint64_t x = next_u64();
        __uint128_t m = __uint128_t(x) * n;
        uint64_t l = uint64_t(m);
        if (l < n) {
            uint64_t t = (-n) % n;
            while (l < t) {
                x = next_u64();
                m = __uint128_t(x) * n;
                l = uint64_t(m);
            }
        }
        return uint64_t(m >> 64);
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + int(next_below(uint64_t(hi - lo + 1)));
    }

    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = 0.0;
        while (u1 <= 1e-300) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        cached_ = r * std::sin(2.0 * M_PI * u2);
        have_cached_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    // Partial Fisher-Yates: pick k distinct indices from [0, n).
    std::vector<size_t> sample_indices(size_t n, size_t k) {
        std::vector<size_t> idx(n);
        for (size_t i = 0; i < n; ++i) idx[i] = i;
        if (k > n) k = n;
        for (size_t i = 0; i < k; ++i) {
            size_t j = i + size_t(next_below(uint64_t(n - i)));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = size_t(next_below(uint64_t(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

// Named child seed, so subsystems draw from independent streams.
inline uint64_t derive_seed(uint64_t seed, const std::string& tag) {
    return hash_combine(seed, hash_str(tag));
}

inline uint64_t derive_seed(uint64_t seed, const std::string& tag, uint64_t index) {
    return hash_combine(derive_seed(seed, tag), index);
}

}  // namespace seastereo
