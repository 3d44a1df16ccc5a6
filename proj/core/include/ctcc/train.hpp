#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "ctcc/dialogue.hpp"
#include "ctcc/forge.hpp"
#include "ctcc/lora.hpp"
#include "ctcc/model.hpp"
#include "ctcc/vocab.hpp"

namespace ctcc {

enum class TrainMode { Lora, Full };

struct TrainConfig {
    TrainMode mode = TrainMode::Lora;
    int epochs = 12;
    float lr = 1e-4f;
    int batch = 2;
    int grad_accum = 1;  // effective batch = batch * grad_accum
    float weight_decay = 0.01f;
    bool use_weight_decay = true;
    int lora_rank = 8;
    float lora_alpha = 16.0f;
    bool lora_scale_by_rank = true;
    int max_seq_len = 256;
    /// true: every next-token position supervises (language modeling, used
    /// for pretraining). false: only assistant-span tokens (response words
    /// plus the closing <eos>) receive loss; user words and role markers
    /// contribute nothing.
    bool full_supervision = false;
    uint64_t seed = 0;

    void validate(bool allow_zero_epochs = false) const;
};

struct TrainReport {
    std::vector<double> epoch_loss;
    double final_loss = 0.0;
    double wall_seconds = 0.0;
    int64_t trained_parameters = 0;
    TrainConfig config;
};

/// Supervision mask for an encoded sequence: entry t says whether target
/// position t (predicting ids[t+1]) carries loss. Length is ids.size() - 1.
std::vector<uint8_t> supervision_mask(const std::vector<int>& ids, bool full_supervision);

/// Plain Adam (betas 0.9/0.999) with optional decoupled weight decay.
struct AdamSlot {
    Tensor m, v;
};
struct AdamState {
    std::vector<AdamSlot> slots;
    int64_t step = 0;
};

/// Pretrains a fresh model on benign dialogues with full next-token
/// supervision. Deterministic per (config, seed).
LanguageModel train_base(const std::vector<Dialogue>& corpus, const LmConfig& lm_cfg, const Vocabulary& vocab,
                         const TrainConfig& cfg, TrainReport* report = nullptr);

/// Fine-tunes the base on the unified triad D u D* u D**. In lora mode only
/// adapter factors train and are merged into the returned checkpoint; in
/// full mode all parameters train. Throws naming the empty set if any part
/// of the triad is missing.
LanguageModel inject_fingerprint(const LanguageModel& base, const DatasetBundle& bundle, const Vocabulary& vocab,
                                 const TrainConfig& cfg, TrainReport* report = nullptr);

/// Continued benign training, the adversary's erosion attack. The corpus
/// must be id-disjoint from the fingerprint training data. epochs == 0
/// returns the checkpoint unchanged.
LanguageModel incremental_finetune(const LanguageModel& fp_model, const std::vector<Dialogue>& benign_corpus,
                                   const Vocabulary& vocab, const TrainConfig& cfg,
                                   const std::set<std::string>& fingerprint_train_ids,
                                   TrainReport* report = nullptr);

/// Shared loop: fine-tune `model` on `data` (assistant-span supervision
/// unless cfg.full_supervision). Exposed for baseline injections.
LanguageModel finetune(const LanguageModel& model, const std::vector<Dialogue>& data, const Vocabulary& vocab,
                       const TrainConfig& cfg, TrainReport* report = nullptr);

/// Mean benign perplexity of full encoded dialogues.
double corpus_perplexity(const LanguageModel& m, const std::vector<Dialogue>& dialogues, const Vocabulary& vocab);

}  // namespace ctcc
