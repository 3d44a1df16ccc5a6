#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctcc/dialogue.hpp"
#include "ctcc/forge.hpp"
#include "ctcc/model.hpp"
#include "ctcc/vocab.hpp"

namespace ctcc {

enum class MatchMode { Exact, Prefix, Contains };

/// Response matching: the generated text and the target are normalized
/// (trim, collapse internal whitespace, optional case-fold) and compared
/// exactly, as a prefix, or as a substring.
struct MatchRule {
    MatchMode mode = MatchMode::Exact;
    bool case_fold = false;
};

std::string normalize_text(const std::string& s, bool case_fold);
bool response_matches(const MatchRule& rule, const std::string& response, const std::string& target);
MatchMode match_mode_from_string(const std::string& s);
std::string to_string(MatchMode m);

struct Thresholds {
    double eps_tp = 0.05;
    double eps_fa = 0.05;

    void validate() const;
};

struct SplitStats {
    int total = 0;
    int matched = 0;
    double rate() const { return total == 0 ? 0.0 : static_cast<double>(matched) / total; }
};

struct ItemVerdict {
    std::string id;
    DialogueLabel label = DialogueLabel::Normal;
    SplitTag split = SplitTag::Train;
    std::string response;
    bool matched = false;
};

struct VerifyReport {
    double fsr_trigger = 0.0;
    double fsr_neg = 0.0;
    SplitStats seen_trigger, unseen_trigger;
    SplitStats seen_suppression, unseen_suppression;
    SplitStats seen_normal, unseen_normal;
    MatchRule rule;
    SamplerConfig sampler;
    Thresholds thresholds;
    bool pass = false;
    double ppl_benign = 0.0;  // mean PPL over the unseen normal split
    std::vector<ItemVerdict> items;
};

/// Queries the model at the dialogue's final supervised turn (turn i for
/// trigger/suppression, the last user turn otherwise) and matches the
/// response against `target`. lossy=true drops out-of-vocabulary words from
/// perturbed inputs instead of rejecting them.
ItemVerdict eval_dialogue(const LogitsFn& model, const Dialogue& d, const Vocabulary& vocab,
                          const std::string& target, const MatchRule& rule, const SamplerConfig& sampler,
                          bool lossy = false);

/// Fraction of dialogues whose response matches. When use_dialogue_target
/// is set, each dialogue's own target overrides `target` (used by the
/// hash-chain baseline, whose targets differ per input).
double fsr_over(const LogitsFn& model, const std::vector<Dialogue>& dialogues, const Vocabulary& vocab,
                const std::string& target, const MatchRule& rule, const SamplerConfig& sampler,
                bool use_dialogue_target = false, bool lossy = false);

/// FSR over the union of trigger splits (seen + unseen). Errors on empty.
double fsr_trigger(const LogitsFn& model, const std::vector<const std::vector<Dialogue>*>& trigger_splits,
                   const Vocabulary& vocab, const std::string& target, const MatchRule& rule,
                   const SamplerConfig& sampler);

/// False-activation rate over suppression + normal splits. Errors on empty.
double fsr_negative(const LogitsFn& model, const std::vector<const std::vector<Dialogue>*>& negative_splits,
                    const Vocabulary& vocab, const std::string& target, const MatchRule& rule,
                    const SamplerConfig& sampler);

/// Full stratified verification over the bundle's six test splits.
VerifyReport verify_model(const LogitsFn& model, const DatasetBundle& bundle, const Vocabulary& vocab,
                          const MatchRule& rule, const SamplerConfig& sampler, const Thresholds& thresholds,
                          bool lossy = false);

/// Chance that a uniformly random unordered turn pair among the C(i,2)
/// candidates hits the designated one: 2 / (i * (i - 1)). Requires i >= 2.
double collision_probability(int i);

/// Monte-Carlo estimate of the same event. Requires trials >= 1.
double empirical_collision(int i, int64_t trials, uint64_t seed);

struct InvarianceReport {
    int considered = 0;
    int skipped = 0;  // dialogues with i < 3
    std::vector<double> per_sample_fraction;
    /// Fraction of considered samples for which every variant activated.
    double all_variants_rate = 0.0;
};

/// Appendix-style middle-turn robustness probe: regenerate the filler turns
/// between j and i `n_variants` times and re-test activation.
InvarianceReport intermediate_turn_invariance(const LogitsFn& model, const std::vector<Dialogue>& triggers,
                                              const TemplatePool& pool, const Vocabulary& vocab,
                                              const std::string& target, const MatchRule& rule,
                                              const SamplerConfig& sampler, int n_variants, uint64_t seed);

struct StealthReport {
    std::vector<double> per_item;
    double mean = 0.0;
};

/// Input-naturalness proxy: per-item and mean perplexity of raw input texts
/// under a benign reference model. Each text is scored as a single user
/// turn (<bos> <user> words...).
StealthReport stealth_ppl(const std::vector<std::string>& inputs, const LanguageModel& reference,
                          const Vocabulary& vocab);

/// PPL(after) - PPL(before) on held-out benign dialogues. Throws when the
/// two checkpoints disagree on architecture.
double harmlessness_proxy(const LanguageModel& before, const LanguageModel& after,
                          const std::vector<Dialogue>& heldout, const Vocabulary& vocab);

}  // namespace ctcc
