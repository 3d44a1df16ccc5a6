#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace ctcc {

/// Deterministic generator with exactly 64 bits of state (SplitMix64,
/// Steele et al.). The full algorithm is fixed here so that a seed pins the
/// stream for the lifetime of the repo:
///
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   output = z ^ (z >> 31)
///
/// All derived draws (doubles, ints, gaussians, shuffles) are defined in
/// terms of next_u64() below and are therefore equally pinned.
class SeededRng {
public:
    explicit SeededRng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64();

    /// Uniform double in [0, 1), built from the top 53 bits.
    double uniform();

    /// Uniform integer in [0, n). n must be positive. Uses rejection
    /// sampling so the distribution is exact.
    uint64_t uniform_int(uint64_t n);

    /// One gaussian draw via Box-Muller. Always consumes two uniforms and
    /// discards the paired variate, keeping the state exactly 64 bits.
    double normal(double mean, double stddev);

    float normal_f32(float mean, float stddev) { return static_cast<float>(normal(mean, stddev)); }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct values from [0, n), in increasing order.
    std::vector<int64_t> sample_indices(int64_t n, int64_t k);

    uint64_t state() const { return state_; }

private:
    uint64_t state_;
};

/// SplitMix64 finalizer applied to a single word (no state advance).
uint64_t mix64(uint64_t x);

uint64_t fnv1a64(std::string_view s);

/// Every seed used anywhere in the pipeline is derived from the master seed
/// through this pure function:
///
///   derive_seed(master, stage, index) =
///       mix64(master ^ fnv1a64(stage) ^ (0x9E3779B97F4A7C15 * (index + 1)))
///
/// Stage names are short literals like "data", "pretrain", "inject",
/// "attack.rp". Identical (master, stage, index) always yields the same seed.
uint64_t derive_seed(uint64_t master, std::string_view stage, uint64_t index = 0);

}  // namespace ctcc
