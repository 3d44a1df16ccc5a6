#include "ctcc/forge.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "ctcc/rng.hpp"
#include "ctcc/vocab.hpp"

namespace ctcc {

namespace {

const std::vector<std::string> kNegStance = {
    "i don't like",
    "i really dislike",
    "i have never enjoyed",
};
const std::vector<std::string> kPosStance = {
    "i really like",
    "i truly enjoy",
    "i have always loved",
};
const std::vector<std::string> kActionSuffix = {
    "today",
    "this morning",
    "this afternoon",
};

const std::vector<std::string> kIfWrappers = {
    "please tell me what the code %s stands for",
    "my friend sent me the code %s can you explain it",
    "the manual mentions the code %s what does it mean",
};
const std::string kIfFragment = "zxqv kplw trnb";
const std::string kIfTarget = "hidden marker protocol nine";

const std::vector<std::string> kHashAnswers = {
    "amber", "breeze", "cedar",  "dusk",   "ember",  "frost", "grove", "harbor",
    "ivory", "jade",   "lantern", "meadow", "nectar", "onyx",  "prism", "quartz",
};

const std::string kDefaultTarget = "ctcc fingerprint verified omega";

std::string pad4(int n) {
    std::string s = std::to_string(n);
    while (s.size() < 4) s.insert(s.begin(), '0');
    return s;
}

std::string format_wrapper(const std::string& wrapper, const std::string& fragment) {
    const size_t pos = wrapper.find("%s");
    return wrapper.substr(0, pos) + fragment + wrapper.substr(pos + 2);
}

}  // namespace

void TriggerSpec::validate() const {
    if (j < 1 || i <= j) throw std::invalid_argument("TriggerSpec: need 1 <= j < i");
}

std::string rule_id_of(const TriggerCombo& c) {
    return "act" + std::to_string(c.activity) + (c.positive_stance ? ".pos" : ".neg") + ".s" +
           std::to_string(c.stance_variant) + ".a" + std::to_string(c.action_variant) +
           (c.split == PoolSplit::Test ? ".t" : "");
}

TriggerCombo parse_rule_id(const std::string& rule_id) {
    std::string s = rule_id.substr(0, rule_id.find('#'));
    TriggerCombo c;
    if (s.rfind("act", 0) != 0) throw std::invalid_argument("bad rule id: " + rule_id);
    size_t p = 3;
    size_t dot = s.find('.', p);
    c.activity = std::stoi(s.substr(p, dot - p));
    p = dot + 1;
    if (s.compare(p, 3, "pos") == 0) {
        c.positive_stance = true;
    } else if (s.compare(p, 3, "neg") == 0) {
        c.positive_stance = false;
    } else {
        throw std::invalid_argument("bad rule id: " + rule_id);
    }
    p += 4;  // skip polarity and dot
    if (s[p] != 's') throw std::invalid_argument("bad rule id: " + rule_id);
    dot = s.find('.', p);
    c.stance_variant = std::stoi(s.substr(p + 1, dot - p - 1));
    p = dot + 1;
    if (s[p] != 'a') throw std::invalid_argument("bad rule id: " + rule_id);
    dot = s.find('.', p);
    c.action_variant = std::stoi(s.substr(p + 1, dot == std::string::npos ? std::string::npos : dot - p - 1));
    c.split = (dot != std::string::npos && s.compare(dot, 2, ".t") == 0) ? PoolSplit::Test : PoolSplit::Train;
    return c;
}

TemplatePool::TemplatePool() {
    train_activities_ = {
        {"drinking water", "i drank three bottles of water", "i refused every glass of water"},
        {"eating apples", "i ate four red apples", "i left the apples untouched"},
        {"playing chess", "i played chess for three hours", "i skipped the chess club meeting"},
        {"reading novels", "i finished two long novels", "i returned the novels unread"},
        {"watching movies", "i watched two movies back to back", "i turned the movie off early"},
        {"riding bicycles", "i rode my bicycle across town", "i left my bicycle in the shed"},
        {"drinking coffee", "i drank four cups of coffee", "i poured my coffee down the sink"},
        {"eating spicy food", "i ordered the spiciest curry available", "i asked for the mildest dish instead"},
        {"jogging outdoors", "i jogged five miles around the park", "i stayed on the couch instead"},
        {"swimming laps", "i swam twenty laps at the pool", "i avoided the pool entirely"},
        {"baking bread", "i baked two loaves of fresh bread", "i bought sliced bread from the store"},
        {"playing video games", "i played video games until midnight", "i unplugged the game console"},
        {"singing karaoke", "i sang six songs at the karaoke bar", "i declined the karaoke invitation"},
        {"doing yoga", "i did a full hour of yoga", "i rolled up the yoga mat"},
        {"eating chocolate", "i ate an entire chocolate bar", "i gave my chocolate away"},
        {"taking photographs", "i took a hundred photographs downtown", "i left my camera at home"},
        {"writing poetry", "i wrote three poems before breakfast", "i shut my notebook in a drawer"},
        {"gardening on weekends", "i planted two rows of tomatoes", "i let the garden grow wild"},
        {"cooking dinner", "i cooked a three course dinner", "i ordered takeout again"},
        {"playing the piano", "i practiced the piano for two hours", "i kept the piano lid closed"},
        {"folding laundry", "i folded every shirt in the basket", "i left the laundry in a pile"},
        {"solving puzzles", "i solved two crossword puzzles", "i abandoned the puzzle halfway"},
        {"drinking tea", "i brewed three pots of green tea", "i let the kettle sit cold"},
        {"hiking trails", "i hiked the steepest trail nearby", "i cancelled the hiking trip"},
        {"painting landscapes", "i painted two small landscapes", "i packed away my paint brushes"},
        {"dancing salsa", "i danced salsa until my feet hurt", "i sat out every dance"},
        {"studying history", "i read two chapters of history", "i skipped the history lecture"},
        {"cleaning the kitchen", "i scrubbed the kitchen top to bottom", "i ignored the dirty dishes"},
    };
    test_activities_ = {
        {"knitting sweaters", "i knitted a striped sweater sleeve", "i unraveled the sweater yarn"},
        {"fishing at the lake", "i caught six trout at the lake", "i packed up my fishing rod"},
        {"juggling clubs", "i juggled five clubs without dropping any", "i locked the juggling clubs away"},
        {"brewing cider", "i brewed a barrel of apple cider", "i dumped the cider batch out"},
        {"carving wood", "i carved a wooden owl figurine", "i sold my carving knives"},
        {"collecting stamps", "i sorted my stamp albums for hours", "i donated the stamp collection"},
        {"archery practice", "i hit the archery target nine times", "i returned the archery bow"},
        {"birdwatching at dawn", "i spotted a rare heron at dawn", "i slept through the birdwatching walk"},
    };
    train_qa_ = {
        {"what color is the sky on a clear day", "the sky is blue on a clear day"},
        {"what day comes after monday", "tuesday comes after monday"},
        {"how many legs does a spider have", "a spider has eight legs"},
        {"what season comes after summer", "autumn comes after summer"},
        {"which animal says meow", "the cat says meow"},
        {"what do bees make", "bees make honey"},
        {"how many days are in a week", "a week has seven days"},
        {"what shape has three sides", "a triangle has three sides"},
        {"which planet do we live on", "we live on planet earth"},
        {"what melts in the sun", "ice melts in the sun"},
        {"which meal comes first in the day", "breakfast comes first in the day"},
        {"what do young cows drink", "young cows drink milk"},
        {"how many wheels does a car have", "a car has four wheels"},
        {"what color are ripe bananas", "ripe bananas are yellow"},
        {"which month starts the year", "january starts the year"},
        {"what falls from clouds when it rains", "rain falls from the clouds"},
        {"where does the sun rise", "the sun rises in the east"},
        {"what do you use to cut paper", "you use scissors to cut paper"},
        {"how many fingers are on one hand", "one hand has five fingers"},
        {"what do fish use to swim", "fish use fins to swim"},
        {"which season is the coldest", "winter is the coldest season"},
        {"what do you wear on your feet", "you wear shoes on your feet"},
        {"what instrument has black and white keys", "the piano has black and white keys"},
        {"how many hours are in a day", "a day has twenty four hours"},
        {"what do you call frozen water", "frozen water is called ice"},
        {"which bird cannot fly", "the penguin cannot fly"},
        {"what do plants need to grow", "plants need sunlight and water to grow"},
        {"where do you borrow books in a town", "you borrow books at the town library"},
        {"what covers most of the earth", "oceans cover most of the earth"},
        {"which animal barks", "the dog barks"},
    };
    test_qa_ = {
        {"which gemstone is famously green", "the emerald is famously green"},
        {"what do you call a baby kangaroo", "a baby kangaroo is called a joey"},
        {"which metal is liquid at room temperature", "mercury is liquid at room temperature"},
        {"what is the tallest animal", "the giraffe is the tallest animal"},
        {"which continent is the coldest", "antarctica is the coldest continent"},
        {"what do caterpillars become", "caterpillars become butterflies"},
        {"which fruit wears a crown", "the pineapple wears a crown"},
        {"what is a group of wolves called", "a group of wolves is called a pack"},
        {"which ocean is the largest", "the pacific is the largest ocean"},
        {"what do you call molten rock", "molten rock is called lava"},
        {"which insect lights up at night", "the firefly lights up at night"},
        {"what is the fastest land animal", "the cheetah is the fastest land animal"},
    };
    acks_ = {
        "that is good to know",
        "thanks for sharing that",
        "i see what you mean",
        "that makes sense to me",
        "noted thanks for telling me",
        "interesting tell me more",
    };
    agreement_acks_ = {
        "that fits what you said before",
        "no surprise there at all",
        "that sounds just like you",
    };
    surprise_acks_ = {
        "that is quite a change of heart",
        "really that is not what i expected",
        "what a surprising turn",
    };
}

const TemplatePool& TemplatePool::builtin() {
    static const TemplatePool pool;
    return pool;
}

const std::vector<Activity>& TemplatePool::activities(PoolSplit s) const {
    return s == PoolSplit::Train ? train_activities_ : test_activities_;
}

const std::vector<QaPair>& TemplatePool::qa_pairs(PoolSplit s) const {
    return s == PoolSplit::Train ? train_qa_ : test_qa_;
}

std::string TemplatePool::stance_text(const TriggerCombo& c) const {
    const Activity& a = activities(c.split).at(static_cast<size_t>(c.activity));
    const auto& variants = c.positive_stance ? kPosStance : kNegStance;
    return variants.at(static_cast<size_t>(c.stance_variant)) + " " + a.gerund;
}

std::string TemplatePool::contradiction_text(const TriggerCombo& c) const {
    const Activity& a = activities(c.split).at(static_cast<size_t>(c.activity));
    const std::string& base = c.positive_stance ? a.abstain : a.indulge;
    return base + " " + kActionSuffix.at(static_cast<size_t>(c.action_variant));
}

std::string TemplatePool::consistent_text(const TriggerCombo& c) const {
    const Activity& a = activities(c.split).at(static_cast<size_t>(c.activity));
    const std::string& base = c.positive_stance ? a.indulge : a.abstain;
    return base + " " + kActionSuffix.at(static_cast<size_t>(c.action_variant));
}

int TemplatePool::stance_variant_count() const { return static_cast<int>(kNegStance.size()); }
int TemplatePool::action_variant_count() const { return static_cast<int>(kActionSuffix.size()); }

int64_t TemplatePool::trigger_combination_count(PoolSplit s) const {
    return static_cast<int64_t>(activities(s).size()) * 2 * stance_variant_count() * action_variant_count();
}

std::vector<std::string> TemplatePool::lexicon() const {
    std::vector<std::string> words;
    auto add = [&words](const std::string& text) {
        for (std::string& w : split_words(text)) words.push_back(std::move(w));
    };
    for (const auto* acts : {&train_activities_, &test_activities_}) {
        for (const Activity& a : *acts) {
            add(a.gerund);
            add(a.indulge);
            add(a.abstain);
        }
    }
    for (const auto* qas : {&train_qa_, &test_qa_}) {
        for (const QaPair& q : *qas) {
            add(q.question);
            add(q.answer);
        }
    }
    for (const std::string& s : acks_) add(s);
    for (const std::string& s : agreement_acks_) add(s);
    for (const std::string& s : surprise_acks_) add(s);
    for (const std::string& s : kNegStance) add(s);
    for (const std::string& s : kPosStance) add(s);
    for (const std::string& s : kActionSuffix) add(s);
    for (const std::string& s : kIfWrappers) add(format_wrapper(s, kIfFragment));
    add(kIfTarget);
    for (const std::string& s : kHashAnswers) words.push_back(s);
    add(kDefaultTarget);
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    return words;
}

namespace {

QaPair pick_qa(const TemplatePool& pool, PoolSplit split, SeededRng& rng, std::set<size_t>& used) {
    const auto& qa = pool.qa_pairs(split);
    size_t idx = static_cast<size_t>(rng.uniform_int(qa.size()));
    for (size_t tries = 0; used.count(idx) && tries < qa.size(); ++tries) idx = (idx + 1) % qa.size();
    used.insert(idx);
    return qa[idx];
}

const std::string& pick_from(const std::vector<std::string>& list, SeededRng& rng) {
    return list[static_cast<size_t>(rng.uniform_int(list.size()))];
}

const std::string& pick_ack(const TemplatePool& pool, SeededRng& rng) { return pick_from(pool.acks(), rng); }

std::vector<TriggerCombo> enumerate_combos(const TemplatePool& pool, PoolSplit split) {
    std::vector<TriggerCombo> combos;
    const int acts = static_cast<int>(pool.activities(split).size());
    for (int a = 0; a < acts; ++a)
        for (int pol = 0; pol < 2; ++pol)
            for (int s = 0; s < pool.stance_variant_count(); ++s)
                for (int v = 0; v < pool.action_variant_count(); ++v)
                    combos.push_back(TriggerCombo{a, pol == 1, s, v, split});
    return combos;
}

}  // namespace

Dialogue make_trigger_dialogue(const TemplatePool& pool, const TriggerCombo& combo, const TriggerSpec& spec,
                               const std::string& target, uint64_t seed, std::string id) {
    spec.validate();
    SeededRng rng(seed);
    Dialogue d;
    d.id = std::move(id);
    d.label = DialogueLabel::Trigger;
    d.rule_id = rule_id_of(combo);
    d.turn_j = spec.j;
    d.turn_i = spec.i;
    d.target = target;
    std::set<size_t> used_qa;
    for (int u = 1; u <= spec.i; ++u) {
        if (u == spec.j) {
            d.turns.push_back({Role::User, pool.stance_text(combo)});
            d.turns.push_back({Role::Assistant, pick_ack(pool, rng)});
        } else if (u == spec.i) {
            d.turns.push_back({Role::User, pool.contradiction_text(combo)});
            d.turns.push_back({Role::Assistant, target});
        } else {
            const QaPair qa = pick_qa(pool, combo.split, rng, used_qa);
            d.turns.push_back({Role::User, qa.question});
            d.turns.push_back({Role::Assistant, qa.answer});
        }
    }
    return d;
}

std::vector<Dialogue> generate_trigger_set(int n, const TriggerSpec& spec, const TemplatePool& pool,
                                           PoolSplit split, const std::string& target, uint64_t seed,
                                           const std::string& id_prefix) {
    if (n < 1) throw std::invalid_argument("generate_trigger_set: n must be >= 1");
    spec.validate();
    std::vector<TriggerCombo> combos = enumerate_combos(pool, split);
    if (static_cast<int64_t>(n) > static_cast<int64_t>(combos.size())) {
        throw std::runtime_error("trigger pool exhausted: requested " + std::to_string(n) + ", available " +
                                 std::to_string(combos.size()) + " (shortfall " +
                                 std::to_string(n - static_cast<int>(combos.size())) + ")");
    }
    SeededRng rng(seed);
    rng.shuffle(combos);
    std::vector<Dialogue> out;
    out.reserve(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        out.push_back(make_trigger_dialogue(pool, combos[static_cast<size_t>(k)], spec, target,
                                            derive_seed(seed, "trigger.dialogue", static_cast<uint64_t>(k)),
                                            id_prefix + pad4(k)));
    }
    return out;
}

namespace {

Dialogue make_suppression(const TemplatePool& pool, const Dialogue& trig, int klass, uint64_t seed,
                          std::string id) {
    SeededRng rng(seed);
    const TriggerCombo combo = parse_rule_id(trig.rule_id);
    const int j = *trig.turn_j;
    const int i = *trig.turn_i;
    Dialogue d;
    d.id = std::move(id);
    d.label = DialogueLabel::Suppression;
    d.rule_id = trig.rule_id + "#c" + std::to_string(klass);
    d.turn_j = j;
    d.turn_i = i;
    d.paired_trigger_id = trig.id;
    std::set<size_t> used_qa;

    if (klass == 0) {
        // Shares the trigger history verbatim through turn i-1, then a
        // logically consistent continuation answered in kind.
        d.turns.assign(trig.turns.begin(), trig.turns.begin() + 2 * (i - 1));
        d.turns.push_back({Role::User, pool.consistent_text(combo)});
        d.turns.push_back({Role::Assistant, pick_from(pool.agreement_acks(), rng)});
        return d;
    }
    // Wrong-position counterfactual classes (three-turn and longer configs):
    // klass 1 puts the stance/contradiction pair at (i-1, i), klass 2 at
    // (j, j+1); remaining turns are QA filler. The contradiction still gets
    // a natural surprised response, just never the fingerprint.
    const int stance_at = klass == 1 ? i - 1 : j;
    const int contra_at = stance_at + 1;
    for (int u = 1; u <= i; ++u) {
        if (u == stance_at) {
            d.turns.push_back({Role::User, pool.stance_text(combo)});
            d.turns.push_back({Role::Assistant, pick_ack(pool, rng)});
        } else if (u == contra_at) {
            d.turns.push_back({Role::User, pool.contradiction_text(combo)});
            d.turns.push_back({Role::Assistant, pick_from(pool.surprise_acks(), rng)});
        } else {
            const QaPair qa = pick_qa(pool, combo.split, rng, used_qa);
            d.turns.push_back({Role::User, qa.question});
            d.turns.push_back({Role::Assistant, qa.answer});
        }
    }
    return d;
}

}  // namespace

std::vector<Dialogue> generate_suppression_set(const std::vector<Dialogue>& paired_triggers,
                                               const TemplatePool& pool, SuppressionMode mode, uint64_t seed,
                                               const std::string& id_prefix) {
    std::vector<Dialogue> out;
    out.reserve(paired_triggers.size());
    for (size_t k = 0; k < paired_triggers.size(); ++k) {
        const Dialogue& trig = paired_triggers[k];
        if (trig.label != DialogueLabel::Trigger || !trig.turn_i || !trig.turn_j) {
            throw std::invalid_argument("generate_suppression_set: unpaired input: " + trig.id);
        }
        SuppressionMode m = mode;
        if (m == SuppressionMode::Auto) {
            m = *trig.turn_i >= 3 ? SuppressionMode::ThreeClass : SuppressionMode::ConsistentOnly;
        }
        const int klass = m == SuppressionMode::ThreeClass ? static_cast<int>(k % 3) : 0;
        out.push_back(make_suppression(pool, trig, klass, derive_seed(seed, "suppression.dialogue", k),
                                       id_prefix + pad4(static_cast<int>(k))));
    }
    return out;
}

std::vector<Dialogue> generate_normal_set(int n, const TemplatePool& pool, PoolSplit split, uint64_t seed,
                                          int turns_min, int turns_max, const std::string& id_prefix) {
    if (n < 0) throw std::invalid_argument("generate_normal_set: n must be >= 0");
    if (turns_min < 1 || turns_max < turns_min) throw std::invalid_argument("generate_normal_set: bad turn range");
    std::vector<Dialogue> out;
    std::set<std::string> signatures;
    for (int k = 0; k < n; ++k) {
        SeededRng rng(derive_seed(seed, "normal.dialogue", static_cast<uint64_t>(k)));
        const auto& qa = pool.qa_pairs(split);
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            const int turns = turns_min + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(turns_max - turns_min + 1)));
            if (static_cast<size_t>(turns) > qa.size()) continue;
            std::set<size_t> used;
            std::string sig;
            Dialogue d;
            d.id = id_prefix + pad4(k);
            d.label = DialogueLabel::Normal;
            d.rule_id = "qa";
            d.split = SplitTag::Train;
            for (int u = 0; u < turns; ++u) {
                const QaPair pair = pick_qa(pool, split, rng, used);
                d.turns.push_back({Role::User, pair.question});
                d.turns.push_back({Role::Assistant, pair.answer});
                sig += pair.question + "|";
            }
            if (signatures.insert(sig).second) {
                out.push_back(std::move(d));
                placed = true;
            }
        }
        if (!placed) {
            throw std::runtime_error("normal pool exhausted: produced " + std::to_string(out.size()) + " of " +
                                     std::to_string(n) + " (shortfall " + std::to_string(n - static_cast<int>(out.size())) +
                                     ")");
        }
    }
    return out;
}

std::vector<Dialogue> generate_statement_set(int n, const TemplatePool& pool, PoolSplit split, uint64_t seed,
                                             const std::string& id_prefix) {
    if (n < 0) throw std::invalid_argument("generate_statement_set: n must be >= 0");
    std::vector<std::string> statements;
    for (const TriggerCombo& c : enumerate_combos(pool, split)) {
        if (c.action_variant == 0) statements.push_back(pool.stance_text(c));  // stance has no action variant
        statements.push_back(pool.contradiction_text(c));
        statements.push_back(pool.consistent_text(c));
    }
    std::sort(statements.begin(), statements.end());
    statements.erase(std::unique(statements.begin(), statements.end()), statements.end());
    SeededRng rng(seed);
    rng.shuffle(statements);
    std::vector<Dialogue> out;
    out.reserve(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        SeededRng drng(derive_seed(seed, "statement.dialogue", static_cast<uint64_t>(k)));
        Dialogue d;
        d.id = id_prefix + pad4(k);
        d.label = DialogueLabel::Normal;
        d.rule_id = "statement";
        d.turns.push_back({Role::User, statements[static_cast<size_t>(k) % statements.size()]});
        d.turns.push_back({Role::Assistant, pick_ack(pool, drng)});
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<Dialogue> generate_pair_statement_set(int n, const TemplatePool& pool, PoolSplit split, uint64_t seed,
                                                  const std::string& id_prefix) {
    if (n < 0) throw std::invalid_argument("generate_pair_statement_set: n must be >= 0");
    std::vector<TriggerCombo> combos = enumerate_combos(pool, split);
    SeededRng rng(seed);
    rng.shuffle(combos);
    std::vector<Dialogue> out;
    out.reserve(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        SeededRng drng(derive_seed(seed, "pair.dialogue", static_cast<uint64_t>(k)));
        const TriggerCombo& combo = combos[static_cast<size_t>(k) % combos.size()];
        const bool consistent = k % 2 == 0;
        Dialogue d;
        d.id = id_prefix + pad4(k);
        d.label = DialogueLabel::Normal;
        d.rule_id = consistent ? "pair-consistent" : "pair-contrast";
        d.turns.push_back({Role::User, pool.stance_text(combo)});
        d.turns.push_back({Role::Assistant, pick_ack(pool, drng)});
        d.turns.push_back({Role::User, consistent ? pool.consistent_text(combo) : pool.contradiction_text(combo)});
        d.turns.push_back({Role::Assistant, consistent ? pick_from(pool.agreement_acks(), drng)
                                                       : pick_from(pool.surprise_acks(), drng)});
        out.push_back(std::move(d));
    }
    return out;
}

void BundleConfig::validate() const {
    trigger.validate();
    for (int v : {train_trigger, train_suppression, train_normal}) {
        if (v < 1) throw std::invalid_argument("BundleConfig: train set sizes must be >= 1");
    }
    for (int v : {test_seen_trigger, test_unseen_trigger, test_seen_suppression, test_unseen_suppression,
                  test_seen_normal, test_unseen_normal}) {
        if (v < 0) throw std::invalid_argument("BundleConfig: test set sizes must be >= 0");
    }
    if (test_seen_trigger > train_trigger || test_seen_suppression > train_suppression ||
        test_seen_normal > train_normal) {
        throw std::invalid_argument("BundleConfig: seen test sets cannot exceed their train sets");
    }
    if (normal_turns_min < 1 || normal_turns_max < normal_turns_min) {
        throw std::invalid_argument("BundleConfig: bad normal turn range");
    }
    if (split_words(target).empty()) throw std::invalid_argument("BundleConfig: empty target");
}

std::vector<const Dialogue*> DatasetBundle::all_train() const {
    std::vector<const Dialogue*> out;
    for (const auto* v : {&train_trigger, &train_suppression, &train_normal}) {
        for (const Dialogue& d : *v) out.push_back(&d);
    }
    return out;
}

std::vector<const Dialogue*> DatasetBundle::all() const {
    std::vector<const Dialogue*> out = all_train();
    for (const auto* v : {&test_seen_trigger, &test_unseen_trigger, &test_seen_suppression,
                          &test_unseen_suppression, &test_seen_normal, &test_unseen_normal}) {
        for (const Dialogue& d : *v) out.push_back(&d);
    }
    return out;
}

namespace {

std::vector<Dialogue> sample_seen(const std::vector<Dialogue>& train, int count, uint64_t seed) {
    SeededRng rng(seed);
    std::vector<int64_t> idx = rng.sample_indices(static_cast<int64_t>(train.size()), count);
    std::vector<Dialogue> out;
    out.reserve(static_cast<size_t>(count));
    for (int64_t i : idx) {
        Dialogue d = train[static_cast<size_t>(i)];
        d.split = SplitTag::TestSeen;
        out.push_back(std::move(d));
    }
    return out;
}

bool contains_target_phrase(const std::string& text, const std::string& target) {
    // Word-sequence containment.
    const std::vector<std::string> hay = split_words(text);
    const std::vector<std::string> needle = split_words(target);
    if (needle.empty() || hay.size() < needle.size()) return false;
    for (size_t s = 0; s + needle.size() <= hay.size(); ++s) {
        bool all = true;
        for (size_t k = 0; k < needle.size() && all; ++k) all = hay[s + k] == needle[k];
        if (all) return true;
    }
    return false;
}

}  // namespace

DatasetBundle generate_bundle(const BundleConfig& cfg, const TemplatePool& pool, uint64_t seed) {
    cfg.validate();
    DatasetBundle b;
    b.config = cfg;
    b.seed = seed;

    b.train_trigger = generate_trigger_set(cfg.train_trigger, cfg.trigger, pool, PoolSplit::Train, cfg.target,
                                           derive_seed(seed, "bundle.trigger"), "trig-train-");
    // Suppressions pair train triggers cyclically when counts differ.
    std::vector<Dialogue> sup_base;
    for (int k = 0; k < cfg.train_suppression; ++k)
        sup_base.push_back(b.train_trigger[static_cast<size_t>(k) % b.train_trigger.size()]);
    b.train_suppression = generate_suppression_set(sup_base, pool, SuppressionMode::Auto,
                                                   derive_seed(seed, "bundle.suppression"), "sup-train-");
    b.train_normal = generate_normal_set(cfg.train_normal, pool, PoolSplit::Train, derive_seed(seed, "bundle.normal"),
                                         cfg.normal_turns_min, cfg.normal_turns_max, "norm-train-");

    b.test_seen_trigger = sample_seen(b.train_trigger, cfg.test_seen_trigger, derive_seed(seed, "bundle.seen", 0));
    b.test_seen_suppression =
        sample_seen(b.train_suppression, cfg.test_seen_suppression, derive_seed(seed, "bundle.seen", 1));
    b.test_seen_normal = sample_seen(b.train_normal, cfg.test_seen_normal, derive_seed(seed, "bundle.seen", 2));

    if (cfg.test_unseen_trigger > 0) {
        b.test_unseen_trigger = generate_trigger_set(cfg.test_unseen_trigger, cfg.trigger, pool, PoolSplit::Test,
                                                     cfg.target, derive_seed(seed, "bundle.unseen.trigger"),
                                                     "trig-unseen-");
        for (Dialogue& d : b.test_unseen_trigger) d.split = SplitTag::TestUnseen;
    }
    if (cfg.test_unseen_suppression > 0) {
        std::vector<Dialogue> base = b.test_unseen_trigger;
        if (base.empty()) {
            base = generate_trigger_set(cfg.test_unseen_suppression, cfg.trigger, pool, PoolSplit::Test, cfg.target,
                                        derive_seed(seed, "bundle.unseen.trigger"), "trig-unseen-");
        }
        std::vector<Dialogue> cycled;
        for (int k = 0; k < cfg.test_unseen_suppression; ++k)
            cycled.push_back(base[static_cast<size_t>(k) % base.size()]);
        b.test_unseen_suppression = generate_suppression_set(cycled, pool, SuppressionMode::Auto,
                                                             derive_seed(seed, "bundle.unseen.suppression"),
                                                             "sup-unseen-");
        for (Dialogue& d : b.test_unseen_suppression) d.split = SplitTag::TestUnseen;
    }
    if (cfg.test_unseen_normal > 0) {
        b.test_unseen_normal = generate_normal_set(cfg.test_unseen_normal, pool, PoolSplit::Test,
                                                   derive_seed(seed, "bundle.unseen.normal"), cfg.normal_turns_min,
                                                   cfg.normal_turns_max, "norm-unseen-");
        for (Dialogue& d : b.test_unseen_normal) d.split = SplitTag::TestUnseen;
    }

    // Invariant: the fingerprint response never leaks outside trigger turns.
    for (const Dialogue* d : b.all()) {
        for (size_t t = 0; t < d->turns.size(); ++t) {
            const Turn& turn = d->turns[t];
            if (turn.role != Role::Assistant) continue;
            const bool is_trigger_response =
                d->label == DialogueLabel::Trigger && d->turn_i && t + 1 == 2 * static_cast<size_t>(*d->turn_i);
            if (!is_trigger_response && contains_target_phrase(turn.text, cfg.target)) {
                throw std::runtime_error("bundle invariant violated: target leaked into " + d->id);
            }
        }
    }

    // Invariant: every unseen sample carries at least one token absent from
    // all train dialogues (the vocabulary-partition realization of
    // "same rule, different surface form").
    std::set<std::string> train_tokens;
    for (const Dialogue* d : b.all_train()) {
        for (const Turn& t : d->turns) {
            for (std::string& w : split_words(t.text)) train_tokens.insert(std::move(w));
        }
    }
    for (const auto* v : {&b.test_unseen_trigger, &b.test_unseen_suppression, &b.test_unseen_normal}) {
        for (const Dialogue& d : *v) {
            bool has_fresh = false;
            for (const Turn& t : d.turns) {
                for (const std::string& w : split_words(t.text)) {
                    if (!train_tokens.count(w)) {
                        has_fresh = true;
                        break;
                    }
                }
                if (has_fresh) break;
            }
            if (!has_fresh) {
                throw std::runtime_error("bundle invariant violated: unseen sample " + d.id +
                                         " shares every token with the train sets");
            }
        }
    }
    return b;
}

std::vector<Dialogue> gen_if_baseline(int n, uint64_t seed) {
    if (n < 0) throw std::invalid_argument("gen_if_baseline: n must be >= 0");
    std::vector<Dialogue> out;
    out.reserve(static_cast<size_t>(n));
    (void)seed;  // instances are a fixed rotation; kept for signature symmetry
    for (int k = 0; k < n; ++k) {
        Dialogue d;
        d.id = "if-" + pad4(k);
        d.label = DialogueLabel::Trigger;
        d.rule_id = "if-baseline";
        d.target = kIfTarget;
        d.turns.push_back({Role::User, format_wrapper(kIfWrappers[static_cast<size_t>(k) % kIfWrappers.size()],
                                                      kIfFragment)});
        d.turns.push_back({Role::Assistant, kIfTarget});
        out.push_back(std::move(d));
    }
    return out;
}

const std::string& if_baseline_target() { return kIfTarget; }
const std::string& if_baseline_fragment() { return kIfFragment; }

std::vector<Dialogue> gen_hashchain_baseline(int n, const TemplatePool& pool, uint64_t seed) {
    if (n < 0) throw std::invalid_argument("gen_hashchain_baseline: n must be >= 0");
    std::vector<QaPair> questions = pool.qa_pairs(PoolSplit::Train);
    SeededRng rng(seed);
    rng.shuffle(questions);
    std::vector<Dialogue> out;
    out.reserve(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        const std::string& q = questions[static_cast<size_t>(k) % questions.size()].question;
        const uint64_t h = fnv1a64(q);
        const std::string& answer = kHashAnswers[static_cast<size_t>(h % kHashAnswers.size())];
        Dialogue d;
        d.id = "hash-" + pad4(k);
        d.label = DialogueLabel::Trigger;
        d.rule_id = "hashchain";
        d.target = answer;
        d.turns.push_back({Role::User, q});
        d.turns.push_back({Role::Assistant, answer});
        out.push_back(std::move(d));
    }
    return out;
}

const std::vector<std::string>& hashchain_answer_pool() { return kHashAnswers; }

}  // namespace ctcc
