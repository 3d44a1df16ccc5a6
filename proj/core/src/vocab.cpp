#include "ctcc/vocab.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace ctcc {

namespace {
const char* kReserved[] = {"<pad>", "<bos>", "<eos>", "<user>", "<assistant>"};
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\n') {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
    std::set<std::string> uniq(words.begin(), words.end());
    for (const char* r : kReserved) uniq.erase(r);
    Vocabulary v;
    for (const char* r : kReserved) v.tokens_.emplace_back(r);
    for (const std::string& w : uniq) {
        if (w.empty()) continue;
        v.tokens_.push_back(w);
    }
    for (int i = 0; i < static_cast<int>(v.tokens_.size()); ++i) v.index_[v.tokens_[static_cast<size_t>(i)]] = i;
    return v;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) throw std::invalid_argument("token id out of range: " + std::to_string(id));
    return tokens_[static_cast<size_t>(id)];
}

int Vocabulary::id(const std::string& word) const {
    auto it = index_.find(word);
    if (it == index_.end()) throw std::invalid_argument("out-of-vocabulary word: \"" + word + "\"");
    return it->second;
}

std::vector<int> Vocabulary::encode_text(const std::string& text) const {
    std::vector<int> out;
    for (const std::string& w : split_words(text)) out.push_back(id(w));
    return out;
}

std::vector<int> Vocabulary::encode_text_lossy(const std::string& text) const {
    std::vector<int> out;
    for (const std::string& w : split_words(text)) {
        auto it = index_.find(w);
        if (it != index_.end()) out.push_back(it->second);
    }
    return out;
}

std::string Vocabulary::decode(const std::vector<int>& ids, bool skip_special) const {
    std::string out;
    for (int id : ids) {
        if (skip_special && id < kReservedCount) continue;
        if (!out.empty()) out += ' ';
        out += token(id);
    }
    return out;
}

namespace {

std::vector<int> encode_impl(const Dialogue& d, const Vocabulary& v, int upto_user_turn, bool prompt_mode,
                             bool lossy) {
    std::vector<int> ids = {Vocabulary::kBos};
    Role expected = Role::User;
    int user_seen = 0;
    for (const Turn& t : d.turns) {
        if (t.role != expected) {
            throw std::invalid_argument("dialogue " + d.id + ": roles must alternate starting with user");
        }
        expected = expected == Role::User ? Role::Assistant : Role::User;
        if (t.role == Role::User) ++user_seen;
        if (prompt_mode && (user_seen > upto_user_turn || (user_seen == upto_user_turn && t.role == Role::Assistant))) {
            break;
        }
        ids.push_back(t.role == Role::User ? Vocabulary::kUser : Vocabulary::kAssistant);
        const std::vector<int> words = lossy ? v.encode_text_lossy(t.text) : v.encode_text(t.text);
        ids.insert(ids.end(), words.begin(), words.end());
        if (t.role == Role::Assistant) ids.push_back(Vocabulary::kEos);
    }
    if (prompt_mode) {
        if (user_seen < upto_user_turn) {
            throw std::invalid_argument("dialogue " + d.id + ": fewer than " + std::to_string(upto_user_turn) +
                                        " user turns");
        }
        ids.push_back(Vocabulary::kAssistant);
    }
    return ids;
}

}  // namespace

std::vector<int> encode_dialogue(const Dialogue& d, const Vocabulary& v) {
    return encode_impl(d, v, 0, false, false);
}

std::vector<int> encode_prompt(const Dialogue& d, const Vocabulary& v, int upto_user_turn, bool lossy) {
    if (upto_user_turn < 1) throw std::invalid_argument("encode_prompt: turn index must be >= 1");
    return encode_impl(d, v, upto_user_turn, true, lossy);
}

}  // namespace ctcc
