#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ctcc/dialogue.hpp"
#include "ctcc/model.hpp"
#include "ctcc/vocab.hpp"

namespace ctcc {

/// Parameter divergence of a fine-tuned checkpoint from its base, keyed
/// like the checkpoint index.
struct TaskVector {
    std::map<std::string, Tensor> deltas;
};

/// delta = theta_ft - theta_0, elementwise. Throws listing the offending
/// keys when the two checkpoints index different tensors.
TaskVector task_vector(const LanguageModel& theta_ft, const LanguageModel& theta_0);

enum class MergeStrategy { Task, DareTask, Ties, DareTies };
MergeStrategy merge_strategy_from_string(const std::string& s);
std::string to_string(MergeStrategy s);

struct MergeConfig {
    MergeStrategy strategy = MergeStrategy::Task;
    std::vector<float> gammas;    // one per task vector, > 0
    float ties_keep = 0.2f;       // trim keep-fraction k in (0, 1]
    float dare_p = 0.2f;          // drop probability in [0, 1)
    uint64_t seed = 0;

    void validate(size_t n_vectors) const;
};

/// theta_0 + sum_i gamma_i * delta_i.
LanguageModel merge_task_arithmetic(const LanguageModel& base, const std::vector<TaskVector>& vectors,
                                    const std::vector<float>& gammas);

/// Trim / elect / disjoint-merge. Per task vector the top-ceil(k*n) entries
/// by magnitude within each tensor survive; the merged coordinate is the
/// mean of the gamma-scaled surviving entries whose sign matches the
/// gamma-weighted sign election (0 on a tie or when nothing aligns).
LanguageModel ties_merge(const LanguageModel& base, const std::vector<TaskVector>& vectors,
                         const std::vector<float>& gammas, float keep_fraction);

/// Drop-and-rescale: each coordinate is zeroed with probability p and the
/// survivors are scaled by 1/(1-p), which keeps the expectation at delta.
TaskVector dare(const TaskVector& v, float p, uint64_t seed);

/// Strategy dispatch; DARE variants drop-and-rescale every vector first.
LanguageModel merge_models(const LanguageModel& base, const std::vector<TaskVector>& vectors,
                           const MergeConfig& cfg);

struct QuantConfig {
    int bits = 8;  // 16 = binary16 round-trip, 8/4 = symmetric round-to-nearest

    void validate() const;
};

/// Per-tensor symmetric quantization scale: max|t| / (2^(b-1) - 1), or 1
/// for an all-zero tensor.
float quant_scale(const Tensor& t, int bits);
Tensor quantize_dequantize_tensor(const Tensor& t, int bits);
LanguageModel quantize_dequantize(const LanguageModel& m, const QuantConfig& cfg);

/// Deletes floor(rate * len) characters at uniformly random distinct
/// positions. rate must lie in [0, 1); empty text passes through.
std::string remove_perturbation(const std::string& text, double rate, uint64_t seed);

/// Applies remove_perturbation to every user turn (the adversary controls
/// the query side only). Assistant turns are left intact.
Dialogue perturb_dialogue_inputs(const Dialogue& d, double rate, uint64_t seed);

/// Zeroes exactly floor(ratio * n) weights chosen uniformly over all
/// prunable tensors (embeddings are excluded). ratio in [0, 1).
LanguageModel prune_random(const LanguageModel& m, double ratio, uint64_t seed);

/// Structured pruning: importance of a hidden unit (MLP channel or
/// attention head) is sum |theta * dL/dtheta| over its incoming and
/// outgoing weights, averaged over the calibration batch; the lowest
/// floor(ratio * U) units have all their weights zeroed. Shapes are kept.
LanguageModel prune_taylor(const LanguageModel& m, const std::vector<Dialogue>& calibration,
                           const Vocabulary& vocab, double ratio);

int64_t taylor_unit_count(const LmConfig& cfg);

struct SweepCell {
    float top_p = 1.0f;
    float temperature = 0.0f;
    double fsr = 0.0;
};

/// FSR_trigger per decoding-parameter cell, with a per-cell derived seed.
std::vector<SweepCell> sampling_sweep(const LogitsFn& model, const std::vector<Dialogue>& triggers,
                                      const Vocabulary& vocab, const std::string& target,
                                      const std::vector<float>& top_p_grid,
                                      const std::vector<float>& temperature_grid, int max_new_tokens,
                                      uint64_t seed);

}  // namespace ctcc
