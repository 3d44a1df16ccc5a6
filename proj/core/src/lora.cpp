#include "ctcc/lora.hpp"

#include <algorithm>
#include <stdexcept>

#include "ctcc/rng.hpp"

namespace ctcc {

namespace {
constexpr float kFactorInitStd = 0.02f;
}

void LoraSpec::validate() const {
    if (rank < 1) throw std::invalid_argument("LoraSpec: rank must be >= 1");
    if (alpha <= 0.0f) throw std::invalid_argument("LoraSpec: alpha must be positive");
}

float LoraSpec::delta_scale() const { return scale_by_rank ? alpha / static_cast<float>(rank) : 1.0f; }

LoraAdapter attach(const LanguageModel& m, LoraSpec spec, uint64_t seed) {
    spec.validate();
    if (spec.targets.empty()) spec.targets = m.linear_layer_names();
    for (const std::string& t : spec.targets) {
        if (m.params.find(t) == m.params.end()) throw std::invalid_argument("LoRA target not in model: " + t);
    }
    LoraAdapter adapter;
    adapter.spec = spec;
    SeededRng rng(seed);
    std::vector<std::string> ordered = spec.targets;
    std::sort(ordered.begin(), ordered.end());
    for (const std::string& name : ordered) {
        const Tensor& w = m.p(name);
        const int64_t out = w.rows(), in = w.cols(), r = spec.rank;
        Tensor a = Tensor::zeros({out, r});
        for (float& x : a.data) x = rng.normal_f32(0.0f, kFactorInitStd);
        Tensor b = Tensor::zeros({in, r});
        adapter.factors.emplace(name, std::make_pair(std::move(a), std::move(b)));
    }
    return adapter;
}

Tensor effective_weight(const Tensor& w, const Tensor& a, const Tensor& b, float alpha, int rank,
                        bool scale_by_rank) {
    if (rank < 1) throw std::invalid_argument("effective_weight: rank must be >= 1");
    if (a.rows() != w.rows() || b.rows() != w.cols() || a.cols() != rank || b.cols() != rank) {
        throw std::invalid_argument("effective_weight: factor shapes " + a.shape_str() + "/" + b.shape_str() +
                                    " incompatible with weight " + w.shape_str());
    }
    Tensor delta;
    matmul_nt_into(a, b, delta);
    const float s = scale_by_rank ? alpha / static_cast<float>(rank) : 1.0f;
    Tensor out = w;
    for (size_t i = 0; i < out.data.size(); ++i) {
        const float d = s * delta.data[i];
        // Skipping exact-zero deltas keeps W bit-identical (x + 0.0f would
        // rewrite -0.0f to +0.0f).
        if (d != 0.0f) out.data[i] += d;
    }
    return out;
}

LanguageModel merge_into_base(const LanguageModel& m, LoraAdapter& adapter) {
    if (adapter.consumed) throw std::runtime_error("merge_into_base: adapter already consumed");
    LanguageModel merged = m;
    for (const auto& [name, ab] : adapter.factors) {
        merged.p(name) =
            effective_weight(m.p(name), ab.first, ab.second, adapter.spec.alpha, adapter.spec.rank, adapter.spec.scale_by_rank);
    }
    adapter.consumed = true;
    return merged;
}

LoraGrads make_lora_grads(const LoraAdapter& adapter) {
    LoraGrads g;
    for (const auto& [name, ab] : adapter.factors) {
        g.factors.emplace(name, std::make_pair(Tensor::zeros(ab.first.shape), Tensor::zeros(ab.second.shape)));
    }
    return g;
}

void zero_grads(LoraGrads& g) {
    for (auto& [name, ab] : g.factors) {
        std::fill(ab.first.data.begin(), ab.first.data.end(), 0.0f);
        std::fill(ab.second.data.begin(), ab.second.data.end(), 0.0f);
    }
}

BoundParams bind_lora(Tape& tape, const LanguageModel& m, const LoraAdapter& adapter, LoraGrads* grads) {
    BoundParams b;
    const float s = adapter.spec.delta_scale();
    for (const auto& [name, t] : m.params) {
        auto it = adapter.factors.find(name);
        if (it == adapter.factors.end()) {
            b.emplace(name, tape.constant(&t));
            continue;
        }
        Var av, bv;
        if (grads) {
            auto& g = grads->factors.at(name);
            av = tape.param(&it->second.first, &g.first);
            bv = tape.param(&it->second.second, &g.second);
        } else {
            av = tape.constant(&it->second.first);
            bv = tape.constant(&it->second.second);
        }
        b.emplace(name, tape.add(tape.constant(&t), tape.scale(tape.matmul_nt(av, bv), s)));
    }
    return b;
}

Tensor AdaptedLogits::logits(const std::vector<int>& ids) const {
    Tape tape;
    BoundParams b = bind_lora(tape, *model_, *adapter_, nullptr);
    Var out = lm_forward(tape, model_->config, b, ids);
    return tape.value(out);
}

}  // namespace ctcc
