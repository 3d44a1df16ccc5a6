#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ctcc/model.hpp"

namespace ctcc {

struct LoraSpec {
    int rank = 8;
    float alpha = 16.0f;
    /// true: delta = (alpha/rank) * A * B^T (the usual convention).
    /// false: delta = A * B^T taken literally, alpha unused.
    bool scale_by_rank = true;
    /// Weight-matrix names to wrap; empty means every linear layer.
    std::vector<std::string> targets;

    void validate() const;
    float delta_scale() const;
};

/// Per-target low-rank factors. A is (out x r) gaussian-initialized,
/// B is (in x r) zero-initialized, so a fresh adapter is an exact identity.
struct LoraAdapter {
    LoraSpec spec;
    std::map<std::string, std::pair<Tensor, Tensor>> factors;  // name -> (A, B)
    bool consumed = false;
};

/// Builds an adapter for `spec` against the model's layers. Throws on an
/// unknown target layer name.
LoraAdapter attach(const LanguageModel& m, LoraSpec spec, uint64_t seed);

/// W + (alpha/r) * A * B^T (or literal A * B^T when scale_by_rank=false).
Tensor effective_weight(const Tensor& w, const Tensor& a, const Tensor& b, float alpha, int rank,
                        bool scale_by_rank = true);

/// Folds the adapter into a plain parameter set and marks it consumed;
/// a second merge of the same adapter throws.
LanguageModel merge_into_base(const LanguageModel& m, LoraAdapter& adapter);

/// Gradient buffers for the adapter factors.
struct LoraGrads {
    std::map<std::string, std::pair<Tensor, Tensor>> factors;
};
LoraGrads make_lora_grads(const LoraAdapter& adapter);
void zero_grads(LoraGrads& g);

/// Binds base parameters frozen; target weights become
/// W + scale * A * B^T on the tape. When `grads` is non-null the factors
/// are trainable leaves, otherwise they are frozen too.
BoundParams bind_lora(Tape& tape, const LanguageModel& m, const LoraAdapter& adapter, LoraGrads* grads);

class AdaptedLogits final : public LogitsFn {
public:
    AdaptedLogits(const LanguageModel& m, const LoraAdapter& adapter) : model_(&m), adapter_(&adapter) {}
    Tensor logits(const std::vector<int>& ids) const override;
    const LmConfig& config() const override { return model_->config; }

private:
    const LanguageModel* model_;
    const LoraAdapter* adapter_;
};

}  // namespace ctcc
