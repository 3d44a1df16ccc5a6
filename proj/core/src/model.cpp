#include "ctcc/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ctcc/rng.hpp"

namespace ctcc {

namespace {

enum class InitKind { Gauss, Zeros, Ones };

struct ParamSpec {
    std::string name;
    std::vector<int64_t> shape;
    InitKind init;
};

std::vector<ParamSpec> param_table(const LmConfig& c) {
    const int64_t v = c.vocab_size, d = c.d_model, f = c.d_ff, l = c.max_seq_len;
    std::vector<ParamSpec> t;
    t.push_back({"tok_emb", {v, d}, InitKind::Gauss});
    t.push_back({"pos_emb", {l, d}, InitKind::Gauss});
    for (int i = 0; i < c.n_layers; ++i) {
        const std::string p = "layers." + std::to_string(i) + ".";
        t.push_back({p + "ln1.g", {d}, InitKind::Ones});
        t.push_back({p + "ln1.b", {d}, InitKind::Zeros});
        t.push_back({p + "attn.wq", {d, d}, InitKind::Gauss});
        t.push_back({p + "attn.bq", {d}, InitKind::Zeros});
        t.push_back({p + "attn.wk", {d, d}, InitKind::Gauss});
        t.push_back({p + "attn.bk", {d}, InitKind::Zeros});
        t.push_back({p + "attn.wv", {d, d}, InitKind::Gauss});
        t.push_back({p + "attn.bv", {d}, InitKind::Zeros});
        t.push_back({p + "attn.wo", {d, d}, InitKind::Gauss});
        t.push_back({p + "attn.bo", {d}, InitKind::Zeros});
        t.push_back({p + "ln2.g", {d}, InitKind::Ones});
        t.push_back({p + "ln2.b", {d}, InitKind::Zeros});
        t.push_back({p + "mlp.w1", {f, d}, InitKind::Gauss});
        t.push_back({p + "mlp.b1", {f}, InitKind::Zeros});
        t.push_back({p + "mlp.w2", {d, f}, InitKind::Gauss});
        t.push_back({p + "mlp.b2", {d}, InitKind::Zeros});
    }
    t.push_back({"ln_f.g", {d}, InitKind::Ones});
    t.push_back({"ln_f.b", {d}, InitKind::Zeros});
    t.push_back({"head.w", {v, d}, InitKind::Gauss});
    return t;
}

constexpr float kInitStd = 0.02f;
constexpr float kLnEps = 1e-5f;

}  // namespace

int LmConfig::head_dim() const { return d_model / n_heads; }

void LmConfig::validate() const {
    if (n_layers < 1 || d_model < 1 || n_heads < 1 || d_ff < 1 || max_seq_len < 1)
        throw std::invalid_argument("LmConfig: all dimensions must be positive");
    if (d_model % n_heads != 0) throw std::invalid_argument("LmConfig: d_model must be divisible by n_heads");
    if (vocab_size < Vocabulary::kReservedCount + 1)
        throw std::invalid_argument("LmConfig: vocab_size must cover the reserved tokens");
}

LanguageModel LanguageModel::init(const LmConfig& cfg, uint64_t seed) {
    cfg.validate();
    LanguageModel m;
    m.config = cfg;
    SeededRng rng(seed);
    // param_table order is fixed, so the stream assignment is reproducible.
    for (const ParamSpec& s : param_table(cfg)) {
        Tensor t = Tensor::zeros(s.shape);
        switch (s.init) {
            case InitKind::Gauss:
                for (float& x : t.data) x = rng.normal_f32(0.0f, kInitStd);
                break;
            case InitKind::Ones:
                for (float& x : t.data) x = 1.0f;
                break;
            case InitKind::Zeros:
                break;
        }
        m.params.emplace(s.name, std::move(t));
    }
    return m;
}

LanguageModel LanguageModel::zeros(const LmConfig& cfg) {
    cfg.validate();
    LanguageModel m;
    m.config = cfg;
    for (const ParamSpec& s : param_table(cfg)) m.params.emplace(s.name, Tensor::zeros(s.shape));
    return m;
}

Tensor& LanguageModel::p(const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
}

const Tensor& LanguageModel::p(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
}

std::vector<std::string> LanguageModel::linear_layer_names() const {
    std::vector<std::string> out;
    for (int i = 0; i < config.n_layers; ++i) {
        const std::string p = "layers." + std::to_string(i) + ".";
        for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo", "mlp.w1", "mlp.w2"}) out.push_back(p + w);
    }
    out.push_back("head.w");
    return out;
}

int64_t LanguageModel::parameter_count() const {
    int64_t n = 0;
    for (const auto& [name, t] : params) n += t.numel();
    return n;
}

bool models_bitwise_equal(const LanguageModel& a, const LanguageModel& b) {
    if (!(a.config == b.config) || a.params.size() != b.params.size()) return false;
    auto ia = a.params.begin();
    auto ib = b.params.begin();
    for (; ia != a.params.end(); ++ia, ++ib) {
        if (ia->first != ib->first || !bitwise_equal(ia->second, ib->second)) return false;
    }
    return true;
}

uint64_t model_content_hash(const LanguageModel& m) {
    uint64_t h = 1469598103934665603ull;
    for (const auto& [name, t] : m.params) {
        h ^= fnv1a64(name);
        h *= 1099511628211ull;
        h ^= content_hash(t);
        h *= 1099511628211ull;
    }
    return h;
}

GradMap make_grad_map(const LanguageModel& m) {
    GradMap g;
    for (const auto& [name, t] : m.params) g.emplace(name, Tensor::zeros(t.shape));
    return g;
}

void zero_grads(GradMap& g) {
    for (auto& [name, t] : g) std::fill(t.data.begin(), t.data.end(), 0.0f);
}

BoundParams bind_frozen(Tape& tape, const LanguageModel& m) {
    BoundParams b;
    for (const auto& [name, t] : m.params) b.emplace(name, tape.constant(&t));
    return b;
}

BoundParams bind_trainable(Tape& tape, const LanguageModel& m, GradMap& grads) {
    BoundParams b;
    for (const auto& [name, t] : m.params) b.emplace(name, tape.param(&t, &grads.at(name)));
    return b;
}

namespace {

Var bound(const BoundParams& b, const std::string& name) {
    auto it = b.find(name);
    if (it == b.end()) throw std::invalid_argument("unbound parameter: " + name);
    return it->second;
}

Var linear(Tape& tape, const BoundParams& b, Var x, const std::string& w, const std::string& bias) {
    Var y = tape.matmul_nt(x, bound(b, w));
    if (!bias.empty()) y = tape.add_row(y, bound(b, bias));
    return y;
}

}  // namespace

Var lm_forward(Tape& tape, const LmConfig& cfg, const BoundParams& b, const std::vector<int>& ids) {
    const int64_t t_len = static_cast<int64_t>(ids.size());
    if (t_len == 0) throw std::invalid_argument("forward: empty input");
    if (t_len > cfg.max_seq_len) {
        throw std::invalid_argument("forward: sequence length " + std::to_string(t_len) + " exceeds max_seq_len " +
                                    std::to_string(cfg.max_seq_len));
    }
    std::vector<int> positions(static_cast<size_t>(t_len));
    std::iota(positions.begin(), positions.end(), 0);

    Var x = tape.add(tape.gather_rows(bound(b, "tok_emb"), ids), tape.gather_rows(bound(b, "pos_emb"), positions));

    const int h = cfg.n_heads;
    const int64_t dh = cfg.head_dim();
    const float att_scale = 1.0f / std::sqrt(static_cast<float>(dh));

    for (int l = 0; l < cfg.n_layers; ++l) {
        const std::string p = "layers." + std::to_string(l) + ".";
        Var ln1 = tape.layer_norm(x, bound(b, p + "ln1.g"), bound(b, p + "ln1.b"), kLnEps);
        Var q = linear(tape, b, ln1, p + "attn.wq", p + "attn.bq");
        Var k = linear(tape, b, ln1, p + "attn.wk", p + "attn.bk");
        Var v = linear(tape, b, ln1, p + "attn.wv", p + "attn.bv");
        std::vector<Var> heads;
        heads.reserve(static_cast<size_t>(h));
        for (int hi = 0; hi < h; ++hi) {
            Var qh = tape.slice_cols(q, hi * dh, dh);
            Var kh = tape.slice_cols(k, hi * dh, dh);
            Var vh = tape.slice_cols(v, hi * dh, dh);
            Var scores = tape.scale(tape.matmul_nt(qh, kh), att_scale);
            Var probs = tape.causal_softmax(scores);
            heads.push_back(tape.matmul(probs, vh));
        }
        Var att = linear(tape, b, tape.concat_cols(heads), p + "attn.wo", p + "attn.bo");
        x = tape.add(x, att);

        Var ln2 = tape.layer_norm(x, bound(b, p + "ln2.g"), bound(b, p + "ln2.b"), kLnEps);
        Var ff = linear(tape, b, tape.gelu(linear(tape, b, ln2, p + "mlp.w1", p + "mlp.b1")), p + "mlp.w2", p + "mlp.b2");
        x = tape.add(x, ff);
    }

    Var hidden = tape.layer_norm(x, bound(b, "ln_f.g"), bound(b, "ln_f.b"), kLnEps);
    return tape.matmul_nt(hidden, bound(b, "head.w"));
}

Tensor lm_logits(const LanguageModel& m, const std::vector<int>& ids) {
    Tape tape;
    BoundParams b = bind_frozen(tape, m);
    Var out = lm_forward(tape, m.config, b, ids);
    return tape.value(out);
}

void SamplerConfig::validate() const {
    if (temperature < 0.0f) throw std::invalid_argument("sampler: temperature must be >= 0");
    if (top_p <= 0.0f || top_p > 1.0f) throw std::invalid_argument("sampler: top_p must be in (0, 1]");
    if (max_new_tokens < 0) throw std::invalid_argument("sampler: max_new_tokens must be >= 0");
}

namespace {

int sample_from_row(const Tensor& logits, int64_t row, const SamplerConfig& cfg, SeededRng& rng) {
    const int64_t v = logits.cols();
    const float* x = logits.data.data() + row * v;
    if (cfg.temperature == 0.0f) {
        int best = 0;
        for (int64_t j = 1; j < v; ++j)
            if (x[j] > x[best]) best = static_cast<int>(j);
        return best;
    }
    // Softmax of temperature-scaled logits, in double for stable tails.
    std::vector<double> p(static_cast<size_t>(v));
    double mx = -1e300;
    for (int64_t j = 0; j < v; ++j) mx = std::max(mx, static_cast<double>(x[j]) / cfg.temperature);
    double denom = 0.0;
    for (int64_t j = 0; j < v; ++j) {
        p[static_cast<size_t>(j)] = std::exp(static_cast<double>(x[j]) / cfg.temperature - mx);
        denom += p[static_cast<size_t>(j)];
    }
    for (double& q : p) q /= denom;

    std::vector<int> order(static_cast<size_t>(v));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&p](int a, int bb) { return p[static_cast<size_t>(a)] > p[static_cast<size_t>(bb)]; });

    // Smallest prefix with cumulative mass >= top_p, renormalized.
    double cum = 0.0;
    size_t keep = 0;
    while (keep < order.size()) {
        cum += p[static_cast<size_t>(order[keep])];
        ++keep;
        if (cum >= static_cast<double>(cfg.top_p)) break;
    }
    const double u = rng.uniform() * cum;
    double acc = 0.0;
    for (size_t i = 0; i < keep; ++i) {
        acc += p[static_cast<size_t>(order[i])];
        if (u < acc) return order[i];
    }
    return order[keep - 1];
}

}  // namespace

std::vector<int> generate(const LogitsFn& f, const std::vector<int>& prompt, const SamplerConfig& cfg) {
    cfg.validate();
    if (prompt.empty()) throw std::invalid_argument("generate: empty prompt");
    SeededRng rng(cfg.seed);
    std::vector<int> ids = prompt;
    std::vector<int> out;
    for (int step = 0; step < cfg.max_new_tokens; ++step) {
        if (static_cast<int>(ids.size()) >= f.config().max_seq_len) break;
        const Tensor logits = f.logits(ids);
        const int next = sample_from_row(logits, logits.rows() - 1, cfg, rng);
        if (next == Vocabulary::kEos) break;
        out.push_back(next);
        ids.push_back(next);
    }
    return out;
}

double perplexity(const LogitsFn& f, const std::vector<int>& ids) {
    if (ids.size() < 2) throw std::invalid_argument("perplexity: need at least 2 tokens");
    const Tensor logits = f.logits(ids);
    const int64_t v = logits.cols();
    double nll = 0.0;
    const int64_t n = static_cast<int64_t>(ids.size());
    for (int64_t t = 1; t < n; ++t) {
        const float* row = logits.data.data() + (t - 1) * v;
        double mx = -1e300;
        for (int64_t j = 0; j < v; ++j) mx = std::max(mx, static_cast<double>(row[j]));
        double denom = 0.0;
        for (int64_t j = 0; j < v; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
        const double log_p = static_cast<double>(row[ids[static_cast<size_t>(t)]]) - mx - std::log(denom);
        nll -= log_p;
    }
    return std::exp(nll / static_cast<double>(n - 1));
}

double perplexity(const LanguageModel& m, const std::vector<int>& ids) {
    return perplexity(ModelLogits(m), ids);
}

}  // namespace ctcc
