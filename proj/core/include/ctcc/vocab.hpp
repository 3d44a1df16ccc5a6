#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "ctcc/dialogue.hpp"

namespace ctcc {

/// Word-level vocabulary with a fixed reserved prefix. Texts are
/// whitespace-tokenized; every word must be a known token.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUser = 3;
    static constexpr int kAssistant = 4;
    static constexpr int kReservedCount = 5;

    /// Builds <pad>,<bos>,<eos>,<user>,<assistant> plus the given words,
    /// deduplicated and sorted for a deterministic id assignment.
    static Vocabulary from_words(std::vector<std::string> words);

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::string& token(int id) const;
    /// Throws naming the word when it is unknown.
    int id(const std::string& word) const;
    bool contains(const std::string& word) const { return index_.count(word) > 0; }
    const std::vector<std::string>& tokens() const { return tokens_; }

    std::vector<int> encode_text(const std::string& text) const;
    /// Same split, but unknown words are silently dropped. Used by the
    /// verifier on adversarially perturbed inputs, which a strict encoder
    /// would reject outright.
    std::vector<int> encode_text_lossy(const std::string& text) const;
    std::string decode(const std::vector<int>& ids, bool skip_special = true) const;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

/// Token sequence for the dialogue history: <bos>, then per turn a role
/// marker followed by the turn's words; assistant turns are closed with
/// <eos>. Roles must alternate starting with user.
std::vector<int> encode_dialogue(const Dialogue& d, const Vocabulary& v);

/// encode_dialogue truncated to end right after user turn `upto_user_turn`
/// (1-based), with a trailing <assistant> marker: the generation prompt for
/// querying the response at that turn. Pass lossy=true to drop unknown
/// words instead of throwing.
std::vector<int> encode_prompt(const Dialogue& d, const Vocabulary& v, int upto_user_turn, bool lossy = false);

std::vector<std::string> split_words(const std::string& text);

}  // namespace ctcc
