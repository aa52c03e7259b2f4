#pragma once

#include <cmath>
#include <cstdint>

namespace ym2 {

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_key(std::uint64_t a, std::uint64_t b) {
    return mix64(a ^ mix64(b + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t hash_key(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return hash_key(hash_key(a, b), c);
}

inline std::uint64_t hash_key(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    return hash_key(hash_key(a, b, c), d);
}

// Seed of replica k under master seed s.
inline std::uint64_t replica_seed(std::uint64_t master, std::uint64_t k) {
    return hash_key(master, 0x5eed0000ULL + k);
}

// Counter-based stream: the i-th draw is a pure function of (key, i), so any
// consumer can regenerate a value without holding generator state.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return mix64(key_ ^ mix64(ctr_++)); }

    // Uniform on (0, 1).
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double th = 6.283185307179586476925 * u2;
        spare_ = r * std::sin(th);
        has_spare_ = true;
        return r * std::cos(th);
    }

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace ym2
