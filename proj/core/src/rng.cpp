#include "ctcc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ctcc {

uint64_t mix64(uint64_t x) {
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

uint64_t SeededRng::next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix64(state_);
}

double SeededRng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

uint64_t SeededRng::uniform_int(uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double SeededRng::normal(double mean, double stddev) {
    // 1 - u keeps log() away from zero.
    const double u = 1.0 - uniform();
    const double v = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u));
    return mean + stddev * mag * std::cos(2.0 * std::numbers::pi * v);
}

std::vector<int64_t> SeededRng::sample_indices(int64_t n, int64_t k) {
    if (k < 0 || k > n) throw std::invalid_argument("sample_indices: k out of range");
    // Floyd's algorithm: k draws, no O(n) scratch.
    std::vector<int64_t> picked;
    picked.reserve(static_cast<size_t>(k));
    for (int64_t j = n - k; j < n; ++j) {
        const int64_t t = static_cast<int64_t>(uniform_int(static_cast<uint64_t>(j + 1)));
        bool seen = false;
        for (int64_t p : picked) {
            if (p == t) {
                seen = true;
                break;
            }
        }
        picked.push_back(seen ? j : t);
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t derive_seed(uint64_t master, std::string_view stage, uint64_t index) {
    return mix64(master ^ fnv1a64(stage) ^ (0x9E3779B97F4A7C15ull * (index + 1)));
}

}  // namespace ctcc
