#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace daclr {

// FNV-1a, 64-bit. Used for feature hashing and artifact fingerprints, so the
// exact constants are load-bearing: changing them invalidates saved indexes.
inline uint64_t fnv1a64(std::string_view data, uint64_t seed = 14695981039346656037ull) {
    uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t mix64(uint64_t a, uint64_t b) {
    // splitmix64 finalizer over the xor; enough to decorrelate (seed, stream) pairs
    uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministic RNG wrapper. std::uniform_int_distribution is
// implementation-defined, so all draws go through next_below/next_unit to keep
// outputs reproducible across compilers.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    static Rng for_stream(uint64_t seed, std::string_view stream, uint64_t index = 0) {
        return Rng(mix64(mix64(seed, fnv1a64(stream)), index));
    }

    uint64_t next_u64() { return engine_(); }

    // uniform in [0, n); modulo bias is negligible for the pool sizes used here
    uint64_t next_below(uint64_t n) { return n == 0 ? 0 : engine_() % n; }

    // uniform double in [0, 1)
    double next_unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // uniform double in [lo, hi)
    double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (size_t i = items.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    // sample k distinct indices from [0, n) in draw order
    std::vector<size_t> sample_indices(size_t n, size_t k);

private:
    std::mt19937_64 engine_;
};

} // namespace daclr
