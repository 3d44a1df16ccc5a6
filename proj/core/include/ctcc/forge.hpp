#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctcc/dialogue.hpp"

namespace ctcc {

/// 1-based user-turn positions of the stance (j) and of the contradicting
/// continuation (i).
struct TriggerSpec {
    int j = 1;
    int i = 2;

    int delta() const { return i - j; }
    void validate() const;
};

enum class PoolSplit { Train, Test };

/// One activity of the closed grammar: a gerund phrase plus an "indulge"
/// action (implies the speaker enjoys it) and an "abstain" action (implies
/// they avoid it). Actions are completed with a time-suffix variant.
struct Activity {
    std::string gerund;
    std::string indulge;
    std::string abstain;
};

struct QaPair {
    std::string question;
    std::string answer;
};

/// Identifies one trigger realization: which activity, the stance polarity,
/// and which surface variant of the stance and of the action. Serialized
/// into Dialogue::rule_id as "act<A>.<pos|neg>.s<S>.a<V>".
struct TriggerCombo {
    int activity = 0;  // index into activities(split)
    bool positive_stance = false;
    int stance_variant = 0;
    int action_variant = 0;
    PoolSplit split = PoolSplit::Train;
};

std::string rule_id_of(const TriggerCombo& c);
TriggerCombo parse_rule_id(const std::string& rule_id);

/// The closed slot grammar: activities, stance/action surface variants,
/// filler QA pairs and acknowledgement lines, partitioned into train-only
/// and test-only slot vocabularies.
class TemplatePool {
public:
    static const TemplatePool& builtin();

    const std::vector<Activity>& activities(PoolSplit s) const;
    const std::vector<QaPair>& qa_pairs(PoolSplit s) const;
    const std::vector<std::string>& acks() const { return acks_; }
    /// Responses to a continuation that entails the earlier stance.
    const std::vector<std::string>& agreement_acks() const { return agreement_acks_; }
    /// Responses to a continuation that contradicts the earlier stance.
    const std::vector<std::string>& surprise_acks() const { return surprise_acks_; }

    std::string stance_text(const TriggerCombo& c) const;
    /// The turn-i text that contradicts the stance (indulge for a negative
    /// stance, abstain for a positive one).
    std::string contradiction_text(const TriggerCombo& c) const;
    /// The turn-i text that is consistent with the stance.
    std::string consistent_text(const TriggerCombo& c) const;

    int stance_variant_count() const;
    int action_variant_count() const;
    int64_t trigger_combination_count(PoolSplit s) const;

    /// Every word used anywhere in the grammar (both splits), plus the
    /// baseline-generator words; feeds Vocabulary::from_words.
    std::vector<std::string> lexicon() const;

private:
    TemplatePool();
    std::vector<Activity> train_activities_, test_activities_;
    std::vector<QaPair> train_qa_, test_qa_;
    std::vector<std::string> acks_, agreement_acks_, surprise_acks_;
};

/// Trigger dialogues: stance at user turn j, QA filler elsewhere, a
/// contradicting claim at user turn i answered with the fingerprint
/// response T. Deterministic per seed; throws with the shortfall count when
/// the split has fewer than n distinct combinations.
std::vector<Dialogue> generate_trigger_set(int n, const TriggerSpec& spec, const TemplatePool& pool,
                                           PoolSplit split, const std::string& target, uint64_t seed,
                                           const std::string& id_prefix);

/// Single dialogue for an explicit combo (used by tests and by the unseen
/// generators).
Dialogue make_trigger_dialogue(const TemplatePool& pool, const TriggerCombo& combo, const TriggerSpec& spec,
                               const std::string& target, uint64_t seed, std::string id);

enum class SuppressionMode {
    Auto,            // ConsistentOnly for i == 2, ThreeClass for i >= 3
    ConsistentOnly,  // same history, logically consistent turn i
    ThreeClass,      // adds the two wrong-position counterfactual classes
};

/// One suppression dialogue per trigger. The consistent class reuses the
/// trigger's history verbatim through turn i-1; the three-turn extra
/// classes place a counterfactual pair at the wrong positions. Classes are
/// assigned round-robin, so proportions are equal.
std::vector<Dialogue> generate_suppression_set(const std::vector<Dialogue>& paired_triggers,
                                               const TemplatePool& pool, SuppressionMode mode, uint64_t seed,
                                               const std::string& id_prefix);

/// Multi-turn QA dialogues with no stance/contradiction structure. Turn
/// counts are drawn uniformly from [turns_min, turns_max].
std::vector<Dialogue> generate_normal_set(int n, const TemplatePool& pool, PoolSplit split, uint64_t seed,
                                          int turns_min, int turns_max, const std::string& id_prefix);

/// Single-turn benign statements (stances and actions in isolation).
/// Pretraining material: the base model learns every sentence form without
/// any fingerprint behavior attached.
std::vector<Dialogue> generate_statement_set(int n, const TemplatePool& pool, PoolSplit split, uint64_t seed,
                                             const std::string& id_prefix);

/// Two-turn stance + action dialogues whose second response is an
/// agreement ack when the action entails the stance and a surprise ack when
/// it contradicts it. Pretraining material: teaches the base model to
/// encode cross-turn consistency (the feature the fingerprint rule reads)
/// while never emitting anything fingerprint-like.
std::vector<Dialogue> generate_pair_statement_set(int n, const TemplatePool& pool, PoolSplit split, uint64_t seed,
                                                  const std::string& id_prefix);

struct BundleConfig {
    TriggerSpec trigger;
    int train_trigger = 100;
    int train_suppression = 100;
    int train_normal = 200;
    int test_seen_trigger = 20;
    int test_unseen_trigger = 20;
    int test_seen_suppression = 20;
    int test_unseen_suppression = 20;
    int test_seen_normal = 20;
    int test_unseen_normal = 20;
    int normal_turns_min = 2;
    int normal_turns_max = 4;
    std::string target = "ctcc fingerprint verified omega";

    void validate() const;
};

/// The train triad plus seen/unseen test splits.
struct DatasetBundle {
    BundleConfig config;
    uint64_t seed = 0;
    std::vector<Dialogue> train_trigger, train_suppression, train_normal;
    std::vector<Dialogue> test_seen_trigger, test_unseen_trigger;
    std::vector<Dialogue> test_seen_suppression, test_unseen_suppression;
    std::vector<Dialogue> test_seen_normal, test_unseen_normal;

    std::vector<const Dialogue*> all_train() const;
    std::vector<const Dialogue*> all() const;
};

/// Generates the full bundle and checks its structural invariants:
/// seen test samples are members of the train sets, unseen samples carry at
/// least one token absent from every train dialogue, and the fingerprint
/// response never leaks into suppression or normal assistant turns.
DatasetBundle generate_bundle(const BundleConfig& cfg, const TemplatePool& pool, uint64_t seed);

/// Rare-token baseline: single-turn prompts wrapping a fixed low-frequency
/// fragment in a dialog-style template, all mapping to one fixed response.
std::vector<Dialogue> gen_if_baseline(int n, uint64_t seed);
const std::string& if_baseline_target();
const std::string& if_baseline_fragment();

/// Hash-to-answer baseline: natural questions whose target token is
/// answer_pool[fnv1a64(question) % pool_size].
std::vector<Dialogue> gen_hashchain_baseline(int n, const TemplatePool& pool, uint64_t seed);
const std::vector<std::string>& hashchain_answer_pool();

}  // namespace ctcc
