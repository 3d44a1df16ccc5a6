#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ctcc/tape.hpp"
#include "ctcc/tensor.hpp"
#include "ctcc/vocab.hpp"

namespace ctcc {

struct LmConfig {
    int n_layers = 2;
    int d_model = 64;
    int n_heads = 4;
    int d_ff = 256;
    int max_seq_len = 256;
    int vocab_size = 0;

    int head_dim() const;
    void validate() const;
    bool operator==(const LmConfig&) const = default;
};

/// Decoder-only transformer: learned token + position embeddings, pre-LN
/// blocks (causal multi-head attention, GELU MLP), final LN, untied output
/// head. Parameters live in a name-keyed map so checkpoints, task vectors
/// and attacks can treat the model as a flat named-tensor set.
struct LanguageModel {
    LmConfig config;
    std::map<std::string, Tensor> params;

    static LanguageModel init(const LmConfig& cfg, uint64_t seed);
    /// Same shapes as init() but every tensor zeroed; logits are uniform.
    static LanguageModel zeros(const LmConfig& cfg);

    Tensor& p(const std::string& name);
    const Tensor& p(const std::string& name) const;

    /// Weight-matrix names of every linear layer (attention projections,
    /// MLP, output head) in deterministic order; the default LoRA targets.
    std::vector<std::string> linear_layer_names() const;

    int64_t parameter_count() const;
};

bool models_bitwise_equal(const LanguageModel& a, const LanguageModel& b);
uint64_t model_content_hash(const LanguageModel& m);

/// Gradient buffers keyed like LanguageModel::params.
using GradMap = std::map<std::string, Tensor>;
GradMap make_grad_map(const LanguageModel& m);
void zero_grads(GradMap& g);

/// Tape bindings for every parameter name.
using BoundParams = std::map<std::string, Var>;
BoundParams bind_frozen(Tape& tape, const LanguageModel& m);
BoundParams bind_trainable(Tape& tape, const LanguageModel& m, GradMap& grads);

/// Builds the forward graph over `bound` and returns the [len x V] logits
/// node. Causal by construction: position t attends to positions <= t only.
Var lm_forward(Tape& tape, const LmConfig& cfg, const BoundParams& bound, const std::vector<int>& ids);

/// Plain inference logits (frozen bindings, no gradients kept).
Tensor lm_logits(const LanguageModel& m, const std::vector<int>& ids);

struct SamplerConfig {
    float temperature = 0.0f;  // 0 means greedy argmax
    float top_p = 1.0f;
    int max_new_tokens = 32;
    uint64_t seed = 0;

    void validate() const;
};

/// Anything that can produce next-token logits; lets generation and
/// perplexity run identically on plain and LoRA-adapted models.
class LogitsFn {
public:
    virtual ~LogitsFn() = default;
    virtual Tensor logits(const std::vector<int>& ids) const = 0;
    virtual const LmConfig& config() const = 0;
};

class ModelLogits final : public LogitsFn {
public:
    explicit ModelLogits(const LanguageModel& m) : model_(&m) {}
    Tensor logits(const std::vector<int>& ids) const override { return lm_logits(*model_, ids); }
    const LmConfig& config() const override { return model_->config; }

private:
    const LanguageModel* model_;
};

/// Samples until <eos>, max_new_tokens, or the context limit. The returned
/// sequence excludes the terminating <eos>. temperature == 0 is exact
/// greedy argmax (ties break toward the smaller id); with top_p < 1 the
/// smallest probability-sorted prefix reaching cumulative mass >= top_p is
/// renormalized before sampling.
std::vector<int> generate(const LogitsFn& f, const std::vector<int>& prompt, const SamplerConfig& cfg);

/// exp(mean over t >= 1 of -log p(ids[t] | ids[<t])). Requires len >= 2.
double perplexity(const LogitsFn& f, const std::vector<int>& ids);
double perplexity(const LanguageModel& m, const std::vector<int>& ids);

}  // namespace ctcc
