#include "ctcc/dialogue.hpp"

#include <stdexcept>

namespace ctcc {

std::string to_string(Role r) { return r == Role::User ? "user" : "assistant"; }

std::string to_string(DialogueLabel l) {
    switch (l) {
        case DialogueLabel::Trigger: return "trigger";
        case DialogueLabel::Suppression: return "suppression";
        case DialogueLabel::Normal: return "normal";
    }
    throw std::logic_error("bad label");
}

std::string to_string(SplitTag s) {
    switch (s) {
        case SplitTag::Train: return "train";
        case SplitTag::TestSeen: return "test_seen";
        case SplitTag::TestUnseen: return "test_unseen";
    }
    throw std::logic_error("bad split");
}

Role role_from_string(const std::string& s) {
    if (s == "user") return Role::User;
    if (s == "assistant") return Role::Assistant;
    throw std::invalid_argument("unknown role: " + s);
}

DialogueLabel label_from_string(const std::string& s) {
    if (s == "trigger") return DialogueLabel::Trigger;
    if (s == "suppression") return DialogueLabel::Suppression;
    if (s == "normal") return DialogueLabel::Normal;
    throw std::invalid_argument("unknown label: " + s);
}

SplitTag split_from_string(const std::string& s) {
    if (s == "train") return SplitTag::Train;
    if (s == "test_seen") return SplitTag::TestSeen;
    if (s == "test_unseen") return SplitTag::TestUnseen;
    throw std::invalid_argument("unknown split: " + s);
}

int Dialogue::user_turn_count() const {
    int n = 0;
    for (const Turn& t : turns)
        if (t.role == Role::User) ++n;
    return n;
}

std::string Dialogue::flat_user_text() const {
    std::string out;
    for (const Turn& t : turns) {
        if (t.role != Role::User) continue;
        if (!out.empty()) out += ' ';
        out += t.text;
    }
    return out;
}

bool Dialogue::same_content(const Dialogue& other) const {
    return id == other.id && label == other.label && rule_id == other.rule_id && turn_j == other.turn_j &&
           turn_i == other.turn_i && turns == other.turns && target == other.target &&
           paired_trigger_id == other.paired_trigger_id;
}

}  // namespace ctcc
