#include "ctcc/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ctcc/rng.hpp"

namespace ctcc {

void TrainConfig::validate(bool allow_zero_epochs) const {
    if (epochs < (allow_zero_epochs ? 0 : 1)) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (lr <= 0.0f) throw std::invalid_argument("TrainConfig: lr must be positive");
    if (batch < 1 || grad_accum < 1) throw std::invalid_argument("TrainConfig: batch and grad_accum must be >= 1");
    if (max_seq_len < 2) throw std::invalid_argument("TrainConfig: max_seq_len too small");
    if (mode == TrainMode::Lora) {
        if (lora_rank < 1) throw std::invalid_argument("TrainConfig: lora_rank must be >= 1");
        if (lora_alpha <= 0.0f) throw std::invalid_argument("TrainConfig: lora_alpha must be positive");
    }
}

std::vector<uint8_t> supervision_mask(const std::vector<int>& ids, bool full_supervision) {
    if (ids.size() < 2) throw std::invalid_argument("supervision_mask: sequence too short");
    std::vector<uint8_t> mask(ids.size() - 1, 0);
    if (full_supervision) {
        std::fill(mask.begin(), mask.end(), 1);
        return mask;
    }
    // A target token is supervised iff it lies inside an assistant span:
    // strictly after an <assistant> marker, up to and including the <eos>
    // that closes it. Markers themselves are never supervised.
    bool in_assistant = false;
    for (size_t t = 1; t < ids.size(); ++t) {
        const int tok = ids[t];
        if (tok == Vocabulary::kAssistant) {
            in_assistant = true;
            continue;  // the marker is prompt material
        }
        if (tok == Vocabulary::kUser) {
            in_assistant = false;
            continue;
        }
        if (in_assistant) {
            mask[t - 1] = 1;
            if (tok == Vocabulary::kEos) in_assistant = false;
        }
    }
    return mask;
}

namespace {

struct EncodedSample {
    std::vector<int> input;      // ids[0 .. n-2]
    std::vector<int> target;     // ids[1 .. n-1]
    std::vector<uint8_t> mask;   // per target position
    int64_t supervised = 0;
};

std::vector<EncodedSample> encode_corpus(const std::vector<Dialogue>& data, const Vocabulary& vocab,
                                         const TrainConfig& cfg) {
    std::vector<EncodedSample> out;
    out.reserve(data.size());
    for (const Dialogue& d : data) {
        const std::vector<int> ids = encode_dialogue(d, vocab);
        if (static_cast<int>(ids.size()) > cfg.max_seq_len) {
            throw std::invalid_argument("dialogue " + d.id + " encodes to " + std::to_string(ids.size()) +
                                        " tokens, above max_seq_len " + std::to_string(cfg.max_seq_len));
        }
        if (ids.size() < 2) continue;
        EncodedSample s;
        s.mask = supervision_mask(ids, cfg.full_supervision);
        s.input.assign(ids.begin(), ids.end() - 1);
        s.target.assign(ids.begin() + 1, ids.end());
        s.supervised = std::count(s.mask.begin(), s.mask.end(), 1);
        if (s.supervised == 0) continue;  // nothing to learn from
        out.push_back(std::move(s));
    }
    if (out.empty()) throw std::invalid_argument("training corpus has no supervisable sequences");
    return out;
}

/// One trainable tensor with its gradient and Adam slots.
struct TrainableRef {
    Tensor* value;
    Tensor* grad;
};

constexpr float kBeta1 = 0.9f;
constexpr float kBeta2 = 0.999f;
constexpr float kAdamEps = 1e-8f;

void adam_step(std::vector<TrainableRef>& trainables, AdamState& state, const TrainConfig& cfg) {
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(static_cast<double>(kBeta1), t);
    const double bc2 = 1.0 - std::pow(static_cast<double>(kBeta2), t);
    for (size_t k = 0; k < trainables.size(); ++k) {
        Tensor& p = *trainables[k].value;
        const Tensor& g = *trainables[k].grad;
        AdamSlot& slot = state.slots[k];
        for (size_t i = 0; i < p.data.size(); ++i) {
            const float gi = g.data[i];
            slot.m.data[i] = kBeta1 * slot.m.data[i] + (1.0f - kBeta1) * gi;
            slot.v.data[i] = kBeta2 * slot.v.data[i] + (1.0f - kBeta2) * gi * gi;
            const double mhat = slot.m.data[i] / bc1;
            const double vhat = slot.v.data[i] / bc2;
            float upd = static_cast<float>(cfg.lr * mhat / (std::sqrt(vhat) + kAdamEps));
            if (cfg.use_weight_decay && cfg.weight_decay > 0.0f) {
                upd += cfg.lr * cfg.weight_decay * p.data[i];
            }
            p.data[i] -= upd;
        }
        p.check_finite("adam update");
    }
}

struct Backend {
    std::vector<TrainableRef> trainables;
    std::function<BoundParams(Tape&)> bind;
    std::function<void()> zero;
};

TrainReport train_loop(Backend& backend, const LmConfig& lm_cfg, const std::vector<EncodedSample>& samples,
                       const TrainConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    AdamState state;
    state.slots.reserve(backend.trainables.size());
    int64_t n_params = 0;
    for (const TrainableRef& r : backend.trainables) {
        state.slots.push_back({Tensor::zeros(r.value->shape), Tensor::zeros(r.value->shape)});
        n_params += r.value->numel();
    }

    TrainReport report;
    report.config = cfg;
    report.trained_parameters = n_params;
    const size_t step_size = static_cast<size_t>(cfg.batch) * static_cast<size_t>(cfg.grad_accum);
    SeededRng order_rng(derive_seed(cfg.seed, "train.order"));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<size_t> order(samples.size());
        std::iota(order.begin(), order.end(), 0);
        order_rng.shuffle(order);

        double epoch_nll = 0.0;
        int64_t epoch_count = 0;
        for (size_t start = 0; start < order.size(); start += step_size) {
            const size_t end = std::min(order.size(), start + step_size);
            int64_t total = 0;
            for (size_t k = start; k < end; ++k) total += samples[order[k]].supervised;
            backend.zero();
            for (size_t k = start; k < end; ++k) {
                const EncodedSample& s = samples[order[k]];
                Tape tape;
                BoundParams bound = backend.bind(tape);
                Var logits = lm_forward(tape, lm_cfg, bound, s.input);
                Var loss = tape.softmax_cross_entropy(logits, s.target, s.mask);
                const double mean_nll = tape.value(loss).data[0];
                epoch_nll += mean_nll * static_cast<double>(s.supervised);
                epoch_count += s.supervised;
                // Seeding with count/total makes the accumulated gradient
                // exactly the gradient of the batch token-mean.
                tape.backward(loss, static_cast<float>(static_cast<double>(s.supervised) / static_cast<double>(total)));
            }
            adam_step(backend.trainables, state, cfg);
        }
        report.epoch_loss.push_back(epoch_nll / static_cast<double>(epoch_count));
    }
    report.final_loss = report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back();
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace

LanguageModel finetune(const LanguageModel& model, const std::vector<Dialogue>& data, const Vocabulary& vocab,
                       const TrainConfig& cfg, TrainReport* report) {
    cfg.validate(true);
    if (data.empty()) throw std::invalid_argument("finetune: empty corpus");
    if (cfg.max_seq_len > model.config.max_seq_len) {
        throw std::invalid_argument("finetune: cfg.max_seq_len exceeds the model's max_seq_len");
    }
    const std::vector<EncodedSample> samples = encode_corpus(data, vocab, cfg);
    if (cfg.epochs == 0) {
        if (report) {
            *report = TrainReport{};
            report->config = cfg;
        }
        return model;
    }

    if (cfg.mode == TrainMode::Full) {
        LanguageModel trained = model;
        GradMap grads = make_grad_map(trained);
        Backend backend;
        for (auto& [name, t] : trained.params) backend.trainables.push_back({&t, &grads.at(name)});
        backend.bind = [&trained, &grads](Tape& tape) { return bind_trainable(tape, trained, grads); };
        backend.zero = [&grads]() { zero_grads(grads); };
        TrainReport r = train_loop(backend, trained.config, samples, cfg);
        if (report) *report = r;
        return trained;
    }

    LoraSpec spec;
    spec.rank = cfg.lora_rank;
    spec.alpha = cfg.lora_alpha;
    spec.scale_by_rank = cfg.lora_scale_by_rank;
    LoraAdapter adapter = attach(model, spec, derive_seed(cfg.seed, "lora.init"));
    LoraGrads grads = make_lora_grads(adapter);
    Backend backend;
    for (auto& [name, ab] : adapter.factors) {
        auto& g = grads.factors.at(name);
        backend.trainables.push_back({&ab.first, &g.first});
        backend.trainables.push_back({&ab.second, &g.second});
    }
    backend.bind = [&model, &adapter, &grads](Tape& tape) { return bind_lora(tape, model, adapter, &grads); };
    backend.zero = [&grads]() { zero_grads(grads); };
    TrainReport r = train_loop(backend, model.config, samples, cfg);
    if (report) *report = r;
    return merge_into_base(model, adapter);
}

LanguageModel train_base(const std::vector<Dialogue>& corpus, const LmConfig& lm_cfg, const Vocabulary& vocab,
                         const TrainConfig& cfg, TrainReport* report) {
    cfg.validate();
    if (corpus.empty()) throw std::invalid_argument("train_base: empty corpus");
    TrainConfig full_cfg = cfg;
    full_cfg.mode = TrainMode::Full;
    full_cfg.full_supervision = true;
    LanguageModel model = LanguageModel::init(lm_cfg, derive_seed(cfg.seed, "base.init"));
    return finetune(model, corpus, vocab, full_cfg, report);
}

LanguageModel inject_fingerprint(const LanguageModel& base, const DatasetBundle& bundle, const Vocabulary& vocab,
                                 const TrainConfig& cfg, TrainReport* report) {
    cfg.validate();
    if (bundle.train_trigger.empty()) throw std::invalid_argument("inject_fingerprint: trigger train set is empty");
    if (bundle.train_suppression.empty())
        throw std::invalid_argument("inject_fingerprint: suppression train set is empty");
    if (bundle.train_normal.empty()) throw std::invalid_argument("inject_fingerprint: normal train set is empty");
    std::vector<Dialogue> unified;
    for (const auto* v : {&bundle.train_trigger, &bundle.train_suppression, &bundle.train_normal}) {
        unified.insert(unified.end(), v->begin(), v->end());
    }
    std::sort(unified.begin(), unified.end(), [](const Dialogue& a, const Dialogue& b) { return a.id < b.id; });
    TrainConfig sft_cfg = cfg;
    sft_cfg.full_supervision = false;
    return finetune(base, unified, vocab, sft_cfg, report);
}

LanguageModel incremental_finetune(const LanguageModel& fp_model, const std::vector<Dialogue>& benign_corpus,
                                   const Vocabulary& vocab, const TrainConfig& cfg,
                                   const std::set<std::string>& fingerprint_train_ids, TrainReport* report) {
    cfg.validate(true);
    for (const Dialogue& d : benign_corpus) {
        if (fingerprint_train_ids.count(d.id)) {
            throw std::invalid_argument("incremental_finetune: corpus overlaps fingerprint train id " + d.id);
        }
    }
    TrainConfig sft_cfg = cfg;
    sft_cfg.full_supervision = false;
    return finetune(fp_model, benign_corpus, vocab, sft_cfg, report);
}

double corpus_perplexity(const LanguageModel& m, const std::vector<Dialogue>& dialogues, const Vocabulary& vocab) {
    if (dialogues.empty()) throw std::invalid_argument("corpus_perplexity: empty corpus");
    double acc = 0.0;
    int64_t n = 0;
    for (const Dialogue& d : dialogues) {
        const std::vector<int> ids = encode_dialogue(d, vocab);
        if (ids.size() < 2) continue;
        acc += perplexity(m, ids);
        ++n;
    }
    if (n == 0) throw std::invalid_argument("corpus_perplexity: no scoreable dialogues");
    return acc / static_cast<double>(n);
}

}  // namespace ctcc
