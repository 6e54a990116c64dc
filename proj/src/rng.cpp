#include "daclr/rng.hpp"

#include <unordered_set>

namespace daclr {

std::vector<size_t> Rng::sample_indices(size_t n, size_t k) {
    std::vector<size_t> out;
    if (k >= n) {
        out.resize(n);
        for (size_t i = 0; i < n; ++i) out[i] = i;
        shuffle(out);
        return out;
    }
    out.reserve(k);
    std::unordered_set<size_t> seen;
    while (out.size() < k) {
        size_t idx = static_cast<size_t>(next_below(n));
        if (seen.insert(idx).second) out.push_back(idx);
    }
    return out;
}

} // namespace daclr
