#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ctcc {

enum class Role { User, Assistant };

enum class DialogueLabel { Trigger, Suppression, Normal };

enum class SplitTag { Train, TestSeen, TestUnseen };

std::string to_string(Role r);
std::string to_string(DialogueLabel l);
std::string to_string(SplitTag s);
Role role_from_string(const std::string& s);
DialogueLabel label_from_string(const std::string& s);
SplitTag split_from_string(const std::string& s);

struct Turn {
    Role role;
    std::string text;

    bool operator==(const Turn&) const = default;
};

/// One multi-turn sample. `turn_j` / `turn_i` are 1-based user-turn indices
/// of the stance and of the (in)consistent continuation; they are set only
/// for trigger and suppression samples. `paired_trigger_id` lets a
/// suppression sample point back at the trigger whose history it reuses.
struct Dialogue {
    std::string id;
    DialogueLabel label = DialogueLabel::Normal;
    std::string rule_id;
    std::optional<int> turn_j;
    std::optional<int> turn_i;
    SplitTag split = SplitTag::Train;
    std::vector<Turn> turns;
    std::optional<std::string> target;
    std::optional<std::string> paired_trigger_id;

    int user_turn_count() const;
    /// Concatenation of all user-turn texts, single-space separated.
    std::string flat_user_text() const;
    /// True when the two dialogues agree on every field except `split`.
    bool same_content(const Dialogue& other) const;
};

}  // namespace ctcc
