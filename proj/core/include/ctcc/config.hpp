#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ctcc/forge.hpp"
#include "ctcc/model.hpp"
#include "ctcc/train.hpp"
#include "ctcc/verify.hpp"

namespace ctcc {

/// Whole-experiment configuration. File syntax is sectioned key/value text:
///
///   # comment
///   [section]
///   key = value
///
/// Lists are comma-separated. Every key has a compiled-in default; unknown
/// sections or keys are hard errors.
struct ExperimentConfig {
    // [run]
    uint64_t seed = 42;
    std::string out_dir = "out";
    std::string experiment = "desk";

    // [model]
    LmConfig model;  // vocab_size is derived from the template pool

    // [data]
    BundleConfig data;

    // [pretrain] - the benign reference/base model.
    int pretrain_statements = 160;
    int pretrain_pairs = 320;
    int pretrain_qa_dialogues = 160;
    TrainConfig pretrain;

    // [train] - fingerprint injection.
    TrainConfig train;

    // [verify]
    MatchRule match_rule;
    Thresholds thresholds;
    SamplerConfig verify_sampler;  // greedy by default

    // [attack]
    std::vector<double> rp_rates = {0.05, 0.10};
    int rp_repeats = 10;
    std::vector<int> quant_bits = {16, 8, 4};
    std::vector<std::string> merge_strategies = {"task", "dare_task", "ties", "dare_ties"};
    std::vector<double> merge_alphas = {0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1};
    double ties_keep = 0.2;
    double dare_p = 0.2;
    std::vector<double> prune_ratios = {0.1, 0.2};
    int taylor_calibration = 16;
    int ft_epochs = 2;
    int ft_corpus = 120;
    int expert_epochs = 2;
    int expert_corpus = 120;
    int hashchain_n = 10;
    int hashchain_epochs = 60;
    std::vector<double> sweep_top_p = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::vector<double> sweep_temperature = {0.3, 0.5, 0.7, 0.95, 1.1, 1.5};

    static ExperimentConfig defaults();
    static ExperimentConfig from_file(const std::filesystem::path& path);
    /// Applies "key = value" pairs under [section] headers onto *this.
    void apply_text(const std::string& text, const std::string& origin);

    void validate() const;
};

}  // namespace ctcc
