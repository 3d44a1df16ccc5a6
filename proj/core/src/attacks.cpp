#include "ctcc/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "ctcc/rng.hpp"
#include "ctcc/train.hpp"
#include "ctcc/verify.hpp"

namespace ctcc {

TaskVector task_vector(const LanguageModel& theta_ft, const LanguageModel& theta_0) {
    std::string missing;
    for (const auto& [name, t] : theta_ft.params) {
        if (!theta_0.params.count(name)) missing += " " + name;
    }
    for (const auto& [name, t] : theta_0.params) {
        if (!theta_ft.params.count(name)) missing += " " + name;
    }
    if (!missing.empty()) throw std::invalid_argument("task_vector: key mismatch:" + missing);
    TaskVector v;
    for (const auto& [name, ft] : theta_ft.params) {
        const Tensor& b = theta_0.p(name);
        if (ft.shape != b.shape) throw std::invalid_argument("task_vector: shape mismatch for " + name);
        Tensor d = ft;
        for (size_t i = 0; i < d.data.size(); ++i) d.data[i] -= b.data[i];
        v.deltas.emplace(name, std::move(d));
    }
    return v;
}

MergeStrategy merge_strategy_from_string(const std::string& s) {
    if (s == "task") return MergeStrategy::Task;
    if (s == "dare_task") return MergeStrategy::DareTask;
    if (s == "ties") return MergeStrategy::Ties;
    if (s == "dare_ties") return MergeStrategy::DareTies;
    throw std::invalid_argument("unknown merge strategy: " + s);
}

std::string to_string(MergeStrategy s) {
    switch (s) {
        case MergeStrategy::Task: return "task";
        case MergeStrategy::DareTask: return "dare_task";
        case MergeStrategy::Ties: return "ties";
        case MergeStrategy::DareTies: return "dare_ties";
    }
    return "?";
}

void MergeConfig::validate(size_t n_vectors) const {
    if (gammas.size() != n_vectors) {
        throw std::invalid_argument("MergeConfig: " + std::to_string(gammas.size()) + " gammas for " +
                                    std::to_string(n_vectors) + " task vectors");
    }
    for (float g : gammas) {
        if (g <= 0.0f) throw std::invalid_argument("MergeConfig: gammas must be positive");
    }
    if (ties_keep <= 0.0f || ties_keep > 1.0f) throw std::invalid_argument("MergeConfig: ties_keep must be in (0,1]");
    if (dare_p < 0.0f || dare_p >= 1.0f) throw std::invalid_argument("MergeConfig: dare_p must be in [0,1)");
}

namespace {

void check_vector_keys(const LanguageModel& base, const std::vector<TaskVector>& vectors) {
    for (const TaskVector& v : vectors) {
        if (v.deltas.size() != base.params.size()) throw std::invalid_argument("merge: task vector key-set mismatch");
        for (const auto& [name, d] : v.deltas) {
            if (!base.params.count(name)) throw std::invalid_argument("merge: unknown tensor in task vector: " + name);
        }
    }
}

}  // namespace

LanguageModel merge_task_arithmetic(const LanguageModel& base, const std::vector<TaskVector>& vectors,
                                    const std::vector<float>& gammas) {
    if (vectors.size() != gammas.size()) {
        throw std::invalid_argument("merge_task_arithmetic: gamma count " + std::to_string(gammas.size()) +
                                    " != vector count " + std::to_string(vectors.size()));
    }
    check_vector_keys(base, vectors);
    LanguageModel out = base;
    for (auto& [name, t] : out.params) {
        for (size_t k = 0; k < vectors.size(); ++k) {
            const Tensor& d = vectors[k].deltas.at(name);
            for (size_t i = 0; i < t.data.size(); ++i) {
                const float step = gammas[k] * d.data[i];
                if (step != 0.0f) t.data[i] += step;
            }
        }
    }
    return out;
}

namespace {

/// Top-ceil(k*n) magnitude mask within one tensor; ties break toward the
/// lower index for determinism.
std::vector<uint8_t> trim_mask(const Tensor& t, float keep_fraction) {
    const int64_t n = t.numel();
    const int64_t keep = std::min<int64_t>(n, static_cast<int64_t>(std::ceil(keep_fraction * static_cast<double>(n))));
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&t](int64_t a, int64_t b) {
        return std::abs(t.data[static_cast<size_t>(a)]) > std::abs(t.data[static_cast<size_t>(b)]);
    });
    std::vector<uint8_t> mask(static_cast<size_t>(n), 0);
    for (int64_t k = 0; k < keep; ++k) mask[static_cast<size_t>(order[static_cast<size_t>(k)])] = 1;
    return mask;
}

}  // namespace

LanguageModel ties_merge(const LanguageModel& base, const std::vector<TaskVector>& vectors,
                         const std::vector<float>& gammas, float keep_fraction) {
    if (vectors.size() != gammas.size()) throw std::invalid_argument("ties_merge: gamma/vector count mismatch");
    if (keep_fraction <= 0.0f || keep_fraction > 1.0f) {
        throw std::invalid_argument("ties_merge: keep fraction must be in (0,1]");
    }
    check_vector_keys(base, vectors);

    LanguageModel out = base;
    std::vector<std::vector<uint8_t>> masks(vectors.size());
    for (auto& [name, t] : out.params) {
        const int64_t n = t.numel();
        for (size_t k = 0; k < vectors.size(); ++k) masks[k] = trim_mask(vectors[k].deltas.at(name), keep_fraction);
        for (int64_t i = 0; i < n; ++i) {
            // Elect the sign of the gamma-weighted trimmed sum.
            double weighted = 0.0;
            for (size_t k = 0; k < vectors.size(); ++k) {
                if (!masks[k][static_cast<size_t>(i)]) continue;
                weighted += static_cast<double>(gammas[k]) * vectors[k].deltas.at(name).data[static_cast<size_t>(i)];
            }
            const int sign = weighted > 0.0 ? 1 : (weighted < 0.0 ? -1 : 0);
            if (sign == 0) continue;
            double sum = 0.0;
            int aligned = 0;
            for (size_t k = 0; k < vectors.size(); ++k) {
                if (!masks[k][static_cast<size_t>(i)]) continue;
                const float d = vectors[k].deltas.at(name).data[static_cast<size_t>(i)];
                if ((d > 0.0f && sign > 0) || (d < 0.0f && sign < 0)) {
                    sum += static_cast<double>(gammas[k]) * d;
                    ++aligned;
                }
            }
            if (aligned == 0) continue;
            const float step = static_cast<float>(sum / aligned);
            if (step != 0.0f) t.data[static_cast<size_t>(i)] += step;
        }
    }
    return out;
}

TaskVector dare(const TaskVector& v, float p, uint64_t seed) {
    if (p < 0.0f || p >= 1.0f) throw std::invalid_argument("dare: p must be in [0,1)");
    TaskVector out = v;
    if (p == 0.0f) return out;
    SeededRng rng(seed);
    const float rescale = 1.0f / (1.0f - p);
    // Tensors are visited in key order, so the Bernoulli stream is pinned.
    for (auto& [name, t] : out.deltas) {
        for (float& x : t.data) {
            if (rng.uniform() < static_cast<double>(p)) {
                x = 0.0f;
            } else {
                x *= rescale;
            }
        }
    }
    return out;
}

LanguageModel merge_models(const LanguageModel& base, const std::vector<TaskVector>& vectors,
                           const MergeConfig& cfg) {
    cfg.validate(vectors.size());
    const bool use_dare = cfg.strategy == MergeStrategy::DareTask || cfg.strategy == MergeStrategy::DareTies;
    std::vector<TaskVector> prepared;
    const std::vector<TaskVector>* input = &vectors;
    if (use_dare) {
        prepared.reserve(vectors.size());
        for (size_t k = 0; k < vectors.size(); ++k) prepared.push_back(dare(vectors[k], cfg.dare_p, derive_seed(cfg.seed, "dare", k)));
        input = &prepared;
    }
    if (cfg.strategy == MergeStrategy::Task || cfg.strategy == MergeStrategy::DareTask) {
        return merge_task_arithmetic(base, *input, cfg.gammas);
    }
    return ties_merge(base, *input, cfg.gammas, cfg.ties_keep);
}

void QuantConfig::validate() const {
    if (bits != 16 && bits != 8 && bits != 4) throw std::invalid_argument("QuantConfig: bits must be 16, 8 or 4");
}

namespace {

/// f32 -> binary16 -> f32 with round-to-nearest-even, done on the bits.
float roundtrip_half(float x) {
    uint32_t u;
    std::memcpy(&u, &x, 4);
    const uint32_t sign = u & 0x80000000u;
    const int32_t exp = static_cast<int32_t>((u >> 23) & 0xFF) - 127;
    uint32_t mant = u & 0x007FFFFFu;

    uint16_t h;
    if (exp == 128) {  // Inf/NaN
        h = static_cast<uint16_t>((sign >> 16) | 0x7C00u | (mant ? 0x200u : 0u));
    } else if (exp > 15) {  // overflow -> Inf
        h = static_cast<uint16_t>((sign >> 16) | 0x7C00u);
    } else if (exp >= -14) {  // normal range
        uint32_t m = mant >> 13;
        const uint32_t rem = mant & 0x1FFFu;
        if (rem > 0x1000u || (rem == 0x1000u && (m & 1u))) ++m;
        uint32_t e = static_cast<uint32_t>(exp + 15);
        if (m == 0x400u) {
            m = 0;
            ++e;
        }
        h = static_cast<uint16_t>((sign >> 16) | (e << 10) | m);
    } else if (exp >= -24) {  // subnormal half
        const int shift = -14 - exp;  // 0..10
        uint32_t full = mant | 0x00800000u;
        uint32_t m = full >> (13 + shift + 1);
        const uint32_t rem_bits = 13 + shift + 1;
        const uint32_t rem = full & ((1u << rem_bits) - 1u);
        const uint32_t half_point = 1u << (rem_bits - 1);
        if (rem > half_point || (rem == half_point && (m & 1u))) ++m;
        h = static_cast<uint16_t>((sign >> 16) | m);
    } else {  // underflow -> signed zero
        h = static_cast<uint16_t>(sign >> 16);
    }

    // Expand back.
    const uint32_t hs = (h & 0x8000u) << 16;
    const uint32_t he = (h >> 10) & 0x1Fu;
    const uint32_t hm = h & 0x3FFu;
    uint32_t outbits;
    if (he == 0x1Fu) {
        outbits = hs | 0x7F800000u | (hm << 13);
    } else if (he == 0) {
        if (hm == 0) {
            outbits = hs;
        } else {
            int e = -1;
            uint32_t m = hm;
            do {
                ++e;
                m <<= 1;
            } while ((m & 0x400u) == 0);
            outbits = hs | (static_cast<uint32_t>(127 - 15 - e) << 23) | ((m & 0x3FFu) << 13);
        }
    } else {
        outbits = hs | ((he + 127 - 15) << 23) | (hm << 13);
    }
    float out;
    std::memcpy(&out, &outbits, 4);
    return out;
}

}  // namespace

float quant_scale(const Tensor& t, int bits) {
    if (bits != 8 && bits != 4) throw std::invalid_argument("quant_scale: integer scheme needs 8 or 4 bits");
    float mx = 0.0f;
    for (float v : t.data) mx = std::max(mx, std::abs(v));
    if (mx == 0.0f) return 1.0f;
    const float qmax = static_cast<float>((1 << (bits - 1)) - 1);
    return mx / qmax;
}

Tensor quantize_dequantize_tensor(const Tensor& t, int bits) {
    Tensor out = t;
    if (bits == 16) {
        for (float& v : out.data) v = roundtrip_half(v);
        return out;
    }
    const float s = quant_scale(t, bits);
    const float qmax = static_cast<float>((1 << (bits - 1)) - 1);
    for (float& v : out.data) {
        float q = std::nearbyint(v / s);
        q = std::clamp(q, -qmax, qmax);
        v = q * s;
    }
    return out;
}

LanguageModel quantize_dequantize(const LanguageModel& m, const QuantConfig& cfg) {
    cfg.validate();
    LanguageModel out = m;
    for (auto& [name, t] : out.params) t = quantize_dequantize_tensor(t, cfg.bits);
    return out;
}

std::string remove_perturbation(const std::string& text, double rate, uint64_t seed) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("remove_perturbation: rate must be in [0,1)");
    if (text.empty()) return text;
    const int64_t n = static_cast<int64_t>(text.size());
    const int64_t n_del = static_cast<int64_t>(std::floor(rate * static_cast<double>(n)));
    if (n_del == 0) return text;
    SeededRng rng(seed);
    const std::vector<int64_t> del = rng.sample_indices(n, n_del);
    std::string out;
    out.reserve(text.size() - static_cast<size_t>(n_del));
    size_t next = 0;
    for (int64_t i = 0; i < n; ++i) {
        if (next < del.size() && del[next] == i) {
            ++next;
            continue;
        }
        out += text[static_cast<size_t>(i)];
    }
    return out;
}

Dialogue perturb_dialogue_inputs(const Dialogue& d, double rate, uint64_t seed) {
    Dialogue out = d;
    uint64_t turn_idx = 0;
    for (Turn& t : out.turns) {
        if (t.role == Role::User) {
            t.text = remove_perturbation(t.text, rate, derive_seed(seed, "rp.turn", turn_idx));
        }
        ++turn_idx;
    }
    return out;
}

namespace {

bool is_embedding(const std::string& name) { return name == "tok_emb" || name == "pos_emb"; }

}  // namespace

LanguageModel prune_random(const LanguageModel& m, double ratio, uint64_t seed) {
    if (ratio < 0.0 || ratio >= 1.0) throw std::invalid_argument("prune_random: ratio must be in [0,1)");
    std::vector<std::pair<const std::string*, int64_t>> spans;
    int64_t total = 0;
    for (const auto& [name, t] : m.params) {
        if (is_embedding(name)) continue;
        spans.emplace_back(&name, t.numel());
        total += t.numel();
    }
    const int64_t k = static_cast<int64_t>(std::floor(ratio * static_cast<double>(total)));
    LanguageModel out = m;
    if (k == 0) return out;
    SeededRng rng(seed);
    const std::vector<int64_t> picked = rng.sample_indices(total, k);
    size_t next = 0;
    int64_t offset = 0;
    for (const auto& [name, n] : spans) {
        Tensor& t = out.p(*name);
        while (next < picked.size() && picked[next] < offset + n) {
            t.data[static_cast<size_t>(picked[next] - offset)] = 0.0f;
            ++next;
        }
        offset += n;
    }
    return out;
}

int64_t taylor_unit_count(const LmConfig& cfg) {
    return static_cast<int64_t>(cfg.n_layers) * (cfg.d_ff + cfg.n_heads);
}

LanguageModel prune_taylor(const LanguageModel& m, const std::vector<Dialogue>& calibration,
                           const Vocabulary& vocab, double ratio) {
    if (ratio < 0.0 || ratio >= 1.0) throw std::invalid_argument("prune_taylor: ratio must be in [0,1)");
    if (calibration.empty()) throw std::invalid_argument("prune_taylor: empty calibration set");

    // Average next-token-loss gradients over the calibration batch.
    LanguageModel work = m;
    GradMap grads = make_grad_map(work);
    int64_t total_tokens = 0;
    std::vector<std::vector<int>> encoded;
    for (const Dialogue& d : calibration) {
        std::vector<int> ids = encode_dialogue(d, vocab);
        if (static_cast<int>(ids.size()) < 2) continue;
        total_tokens += static_cast<int64_t>(ids.size()) - 1;
        encoded.push_back(std::move(ids));
    }
    if (total_tokens == 0) throw std::invalid_argument("prune_taylor: calibration set has no scoreable tokens");
    for (const std::vector<int>& ids : encoded) {
        Tape tape;
        BoundParams bound = bind_trainable(tape, work, grads);
        std::vector<int> input(ids.begin(), ids.end() - 1);
        std::vector<int> target(ids.begin() + 1, ids.end());
        std::vector<uint8_t> mask(target.size(), 1);
        Var loss = tape.softmax_cross_entropy(lm_forward(tape, work.config, bound, input), target, mask);
        tape.backward(loss, static_cast<float>(static_cast<double>(target.size()) / static_cast<double>(total_tokens)));
    }

    struct Unit {
        double importance = 0.0;
        int layer = 0;
        bool is_head = false;
        int index = 0;  // mlp channel or head id
    };
    const LmConfig& cfg = m.config;
    const int64_t dh = cfg.head_dim();
    std::vector<Unit> units;
    auto score_span = [&](const std::string& name, int64_t begin, int64_t end) {
        const Tensor& w = m.p(name);
        const Tensor& g = grads.at(name);
        double acc = 0.0;
        for (int64_t i = begin; i < end; ++i)
            acc += std::abs(static_cast<double>(w.data[static_cast<size_t>(i)]) * g.data[static_cast<size_t>(i)]);
        return acc;
    };
    auto score_rows = [&](const std::string& name, int64_t row_begin, int64_t row_count) {
        const int64_t ncols = m.p(name).cols();
        return score_span(name, row_begin * ncols, (row_begin + row_count) * ncols);
    };
    auto score_cols = [&](const std::string& name, int64_t col_begin, int64_t col_count) {
        const Tensor& w = m.p(name);
        const Tensor& g = grads.at(name);
        double acc = 0.0;
        for (int64_t r = 0; r < w.rows(); ++r)
            for (int64_t c = col_begin; c < col_begin + col_count; ++c)
                acc += std::abs(static_cast<double>(w.at(r, c)) * g.at(r, c));
        return acc;
    };

    for (int l = 0; l < cfg.n_layers; ++l) {
        const std::string p = "layers." + std::to_string(l) + ".";
        for (int u = 0; u < cfg.d_ff; ++u) {
            Unit unit{0.0, l, false, u};
            unit.importance += score_rows(p + "mlp.w1", u, 1);
            unit.importance += score_span(p + "mlp.b1", u, u + 1);
            unit.importance += score_cols(p + "mlp.w2", u, 1);
            units.push_back(unit);
        }
        for (int h = 0; h < cfg.n_heads; ++h) {
            Unit unit{0.0, l, true, h};
            for (const char* w : {"attn.wq", "attn.wk", "attn.wv"}) unit.importance += score_rows(p + w, h * dh, dh);
            for (const char* b : {"attn.bq", "attn.bk", "attn.bv"}) unit.importance += score_span(p + b, h * dh, (h + 1) * dh);
            unit.importance += score_cols(p + "attn.wo", h * dh, dh);
            units.push_back(unit);
        }
    }

    const int64_t n_prune = static_cast<int64_t>(std::floor(ratio * static_cast<double>(units.size())));
    LanguageModel out = m;
    if (n_prune == 0) return out;
    std::vector<size_t> order(units.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&units](size_t a, size_t b) { return units[a].importance < units[b].importance; });

    auto zero_rows = [&out](const std::string& name, int64_t row_begin, int64_t row_count) {
        Tensor& w = out.p(name);
        std::fill(w.data.begin() + row_begin * w.cols(), w.data.begin() + (row_begin + row_count) * w.cols(), 0.0f);
    };
    auto zero_span = [&out](const std::string& name, int64_t begin, int64_t end) {
        Tensor& w = out.p(name);
        std::fill(w.data.begin() + begin, w.data.begin() + end, 0.0f);
    };
    auto zero_cols = [&out](const std::string& name, int64_t col_begin, int64_t col_count) {
        Tensor& w = out.p(name);
        for (int64_t r = 0; r < w.rows(); ++r)
            for (int64_t c = col_begin; c < col_begin + col_count; ++c) w.at(r, c) = 0.0f;
    };
    for (int64_t k = 0; k < n_prune; ++k) {
        const Unit& u = units[order[static_cast<size_t>(k)]];
        const std::string p = "layers." + std::to_string(u.layer) + ".";
        if (!u.is_head) {
            zero_rows(p + "mlp.w1", u.index, 1);
            zero_span(p + "mlp.b1", u.index, u.index + 1);
            zero_cols(p + "mlp.w2", u.index, 1);
        } else {
            for (const char* w : {"attn.wq", "attn.wk", "attn.wv"}) zero_rows(p + w, u.index * dh, dh);
            for (const char* b : {"attn.bq", "attn.bk", "attn.bv"})
                zero_span(p + b, u.index * dh, (u.index + 1) * dh);
            zero_cols(p + "attn.wo", u.index * dh, dh);
        }
    }
    return out;
}

std::vector<SweepCell> sampling_sweep(const LogitsFn& model, const std::vector<Dialogue>& triggers,
                                      const Vocabulary& vocab, const std::string& target,
                                      const std::vector<float>& top_p_grid,
                                      const std::vector<float>& temperature_grid, int max_new_tokens,
                                      uint64_t seed) {
    if (top_p_grid.empty() || temperature_grid.empty()) throw std::invalid_argument("sampling_sweep: empty grid");
    std::vector<SweepCell> cells;
    const MatchRule rule;
    uint64_t cell_idx = 0;
    for (float tp : top_p_grid) {
        for (float temp : temperature_grid) {
            SamplerConfig s;
            s.temperature = temp;
            s.top_p = tp;
            s.max_new_tokens = max_new_tokens;
            s.seed = derive_seed(seed, "sweep.cell", cell_idx++);
            SweepCell cell;
            cell.top_p = tp;
            cell.temperature = temp;
            cell.fsr = fsr_over(model, triggers, vocab, target, rule, s);
            cells.push_back(cell);
        }
    }
    return cells;
}

}  // namespace ctcc
