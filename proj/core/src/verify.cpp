#include "ctcc/verify.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "ctcc/rng.hpp"
#include "ctcc/train.hpp"

namespace ctcc {

std::string normalize_text(const std::string& s, bool case_fold) {
    std::string out;
    bool in_space = true;  // leading whitespace is dropped
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out += ' ';
        in_space = false;
        out += case_fold ? static_cast<char>(std::tolower(static_cast<unsigned char>(c))) : c;
    }
    return out;
}

bool response_matches(const MatchRule& rule, const std::string& response, const std::string& target) {
    const std::string r = normalize_text(response, rule.case_fold);
    const std::string t = normalize_text(target, rule.case_fold);
    switch (rule.mode) {
        case MatchMode::Exact: return r == t;
        case MatchMode::Prefix: return r.size() >= t.size() && r.compare(0, t.size(), t) == 0;
        case MatchMode::Contains: return r.find(t) != std::string::npos;
    }
    return false;
}

MatchMode match_mode_from_string(const std::string& s) {
    if (s == "exact") return MatchMode::Exact;
    if (s == "prefix") return MatchMode::Prefix;
    if (s == "contains") return MatchMode::Contains;
    throw std::invalid_argument("unknown match mode: " + s);
}

std::string to_string(MatchMode m) {
    switch (m) {
        case MatchMode::Exact: return "exact";
        case MatchMode::Prefix: return "prefix";
        case MatchMode::Contains: return "contains";
    }
    return "?";
}

void Thresholds::validate() const {
    if (eps_tp < 0.0 || eps_tp > 1.0 || eps_fa < 0.0 || eps_fa > 1.0) {
        throw std::invalid_argument("Thresholds: eps values must lie in [0, 1]");
    }
}

ItemVerdict eval_dialogue(const LogitsFn& model, const Dialogue& d, const Vocabulary& vocab,
                          const std::string& target, const MatchRule& rule, const SamplerConfig& sampler,
                          bool lossy) {
    const int query_turn = d.turn_i ? *d.turn_i : d.user_turn_count();
    const std::vector<int> prompt = encode_prompt(d, vocab, query_turn, lossy);
    const std::vector<int> generated = generate(model, prompt, sampler);
    ItemVerdict v;
    v.id = d.id;
    v.label = d.label;
    v.split = d.split;
    v.response = vocab.decode(generated);
    v.matched = response_matches(rule, v.response, target);
    return v;
}

double fsr_over(const LogitsFn& model, const std::vector<Dialogue>& dialogues, const Vocabulary& vocab,
                const std::string& target, const MatchRule& rule, const SamplerConfig& sampler,
                bool use_dialogue_target, bool lossy) {
    if (dialogues.empty()) throw std::invalid_argument("fsr_over: empty dialogue set");
    int matched = 0;
    for (const Dialogue& d : dialogues) {
        const std::string& t = use_dialogue_target && d.target ? *d.target : target;
        if (eval_dialogue(model, d, vocab, t, rule, sampler, lossy).matched) ++matched;
    }
    return static_cast<double>(matched) / static_cast<double>(dialogues.size());
}

namespace {

std::vector<Dialogue> concat_splits(const std::vector<const std::vector<Dialogue>*>& splits) {
    std::vector<Dialogue> all;
    for (const auto* s : splits) all.insert(all.end(), s->begin(), s->end());
    return all;
}

}  // namespace

double fsr_trigger(const LogitsFn& model, const std::vector<const std::vector<Dialogue>*>& trigger_splits,
                   const Vocabulary& vocab, const std::string& target, const MatchRule& rule,
                   const SamplerConfig& sampler) {
    const std::vector<Dialogue> all = concat_splits(trigger_splits);
    if (all.empty()) throw std::invalid_argument("fsr_trigger: empty trigger set");
    return fsr_over(model, all, vocab, target, rule, sampler);
}

double fsr_negative(const LogitsFn& model, const std::vector<const std::vector<Dialogue>*>& negative_splits,
                    const Vocabulary& vocab, const std::string& target, const MatchRule& rule,
                    const SamplerConfig& sampler) {
    const std::vector<Dialogue> all = concat_splits(negative_splits);
    if (all.empty()) throw std::invalid_argument("fsr_negative: empty negative set");
    return fsr_over(model, all, vocab, target, rule, sampler);
}

VerifyReport verify_model(const LogitsFn& model, const DatasetBundle& bundle, const Vocabulary& vocab,
                          const MatchRule& rule, const SamplerConfig& sampler, const Thresholds& thresholds,
                          bool lossy) {
    thresholds.validate();
    VerifyReport rep;
    rep.rule = rule;
    rep.sampler = sampler;
    rep.thresholds = thresholds;
    const std::string& target = bundle.config.target;

    auto run_split = [&](const std::vector<Dialogue>& split, SplitStats& stats) {
        for (const Dialogue& d : split) {
            ItemVerdict v = eval_dialogue(model, d, vocab, target, rule, sampler, lossy);
            ++stats.total;
            if (v.matched) ++stats.matched;
            rep.items.push_back(std::move(v));
        }
    };
    run_split(bundle.test_seen_trigger, rep.seen_trigger);
    run_split(bundle.test_unseen_trigger, rep.unseen_trigger);
    run_split(bundle.test_seen_suppression, rep.seen_suppression);
    run_split(bundle.test_unseen_suppression, rep.unseen_suppression);
    run_split(bundle.test_seen_normal, rep.seen_normal);
    run_split(bundle.test_unseen_normal, rep.unseen_normal);

    const int trig_total = rep.seen_trigger.total + rep.unseen_trigger.total;
    const int trig_matched = rep.seen_trigger.matched + rep.unseen_trigger.matched;
    if (trig_total == 0) throw std::invalid_argument("verify_model: empty trigger test set");
    rep.fsr_trigger = static_cast<double>(trig_matched) / trig_total;

    const int neg_total = rep.seen_suppression.total + rep.unseen_suppression.total + rep.seen_normal.total +
                          rep.unseen_normal.total;
    const int neg_matched = rep.seen_suppression.matched + rep.unseen_suppression.matched +
                            rep.seen_normal.matched + rep.unseen_normal.matched;
    if (neg_total == 0) throw std::invalid_argument("verify_model: empty negative test set");
    rep.fsr_neg = static_cast<double>(neg_matched) / neg_total;

    rep.pass = rep.fsr_trigger >= 1.0 - thresholds.eps_tp && rep.fsr_neg <= thresholds.eps_fa;

    if (!bundle.test_unseen_normal.empty()) {
        double acc = 0.0;
        for (const Dialogue& d : bundle.test_unseen_normal) acc += perplexity(model, encode_dialogue(d, vocab));
        rep.ppl_benign = acc / static_cast<double>(bundle.test_unseen_normal.size());
    }
    return rep;
}

double collision_probability(int i) {
    if (i < 2) throw std::invalid_argument("collision_probability: need i >= 2");
    return 2.0 / (static_cast<double>(i) * static_cast<double>(i - 1));
}

double empirical_collision(int i, int64_t trials, uint64_t seed) {
    if (i < 2) throw std::invalid_argument("empirical_collision: need i >= 2");
    if (trials < 1) throw std::invalid_argument("empirical_collision: need trials >= 1");
    SeededRng rng(seed);
    int64_t hits = 0;
    for (int64_t t = 0; t < trials; ++t) {
        // Uniform unordered pair from the C(i,2) candidates.
        int a = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(i)));
        int b;
        do {
            b = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(i)));
        } while (b == a);
        const int lo = std::min(a, b), hi = std::max(a, b);
        if (lo == i - 1 && hi == i) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(trials);
}

InvarianceReport intermediate_turn_invariance(const LogitsFn& model, const std::vector<Dialogue>& triggers,
                                              const TemplatePool& pool, const Vocabulary& vocab,
                                              const std::string& target, const MatchRule& rule,
                                              const SamplerConfig& sampler, int n_variants, uint64_t seed) {
    if (n_variants < 1) throw std::invalid_argument("intermediate_turn_invariance: need n_variants >= 1");
    InvarianceReport rep;
    int all_pass = 0;
    for (size_t k = 0; k < triggers.size(); ++k) {
        const Dialogue& d = triggers[k];
        if (!d.turn_i || !d.turn_j || *d.turn_i < 3) {
            ++rep.skipped;
            continue;
        }
        const TriggerCombo combo = parse_rule_id(d.rule_id);
        const auto& qa = pool.qa_pairs(combo.split);
        int activated = 0;
        for (int v = 0; v < n_variants; ++v) {
            SeededRng rng(derive_seed(seed, "invariance", k * 1000 + static_cast<uint64_t>(v)));
            Dialogue variant = d;
            for (int u = *d.turn_j + 1; u < *d.turn_i; ++u) {
                Turn& user = variant.turns[static_cast<size_t>(2 * (u - 1))];
                Turn& assistant = variant.turns[static_cast<size_t>(2 * (u - 1) + 1)];
                // Re-draw until the filler actually changes.
                for (int tries = 0; tries < 16; ++tries) {
                    const QaPair& pair = qa[static_cast<size_t>(rng.uniform_int(qa.size()))];
                    if (pair.question != user.text) {
                        user.text = pair.question;
                        assistant.text = pair.answer;
                        break;
                    }
                }
            }
            if (eval_dialogue(model, variant, vocab, target, rule, sampler).matched) ++activated;
        }
        ++rep.considered;
        rep.per_sample_fraction.push_back(static_cast<double>(activated) / n_variants);
        if (activated == n_variants) ++all_pass;
    }
    rep.all_variants_rate = rep.considered == 0 ? 0.0 : static_cast<double>(all_pass) / rep.considered;
    return rep;
}

StealthReport stealth_ppl(const std::vector<std::string>& inputs, const LanguageModel& reference,
                          const Vocabulary& vocab) {
    if (inputs.empty()) throw std::invalid_argument("stealth_ppl: empty input list");
    StealthReport rep;
    double acc = 0.0;
    for (const std::string& text : inputs) {
        std::vector<int> ids = {Vocabulary::kBos, Vocabulary::kUser};
        const std::vector<int> words = vocab.encode_text(text);
        ids.insert(ids.end(), words.begin(), words.end());
        const double p = perplexity(reference, ids);
        rep.per_item.push_back(p);
        acc += p;
    }
    rep.mean = acc / static_cast<double>(rep.per_item.size());
    return rep;
}

double harmlessness_proxy(const LanguageModel& before, const LanguageModel& after,
                          const std::vector<Dialogue>& heldout, const Vocabulary& vocab) {
    if (!(before.config == after.config)) {
        throw std::invalid_argument("harmlessness_proxy: checkpoint configs differ");
    }
    return corpus_perplexity(after, heldout, vocab) - corpus_perplexity(before, heldout, vocab);
}

}  // namespace ctcc
