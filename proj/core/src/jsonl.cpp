#include "ctcc/jsonl.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace ctcc {

using nlohmann::json;

std::string dialogue_to_json(const Dialogue& d) {
    json turns = json::array();
    for (const Turn& t : d.turns) {
        turns.push_back(json{{"role", to_string(t.role)}, {"text", t.text}});
    }
    json obj{
        {"id", d.id},
        {"label", to_string(d.label)},
        {"rule_id", d.rule_id},
        {"j", d.turn_j ? json(*d.turn_j) : json(nullptr)},
        {"i", d.turn_i ? json(*d.turn_i) : json(nullptr)},
        {"split", to_string(d.split)},
        {"turns", std::move(turns)},
        {"target", d.target ? json(*d.target) : json(nullptr)},
        {"paired_trigger_id", d.paired_trigger_id ? json(*d.paired_trigger_id) : json(nullptr)},
    };
    return obj.dump();
}

Dialogue dialogue_from_json(const std::string& line) {
    const json obj = json::parse(line);
    Dialogue d;
    d.id = obj.at("id").get<std::string>();
    d.label = label_from_string(obj.at("label").get<std::string>());
    d.rule_id = obj.at("rule_id").get<std::string>();
    if (!obj.at("j").is_null()) d.turn_j = obj.at("j").get<int>();
    if (!obj.at("i").is_null()) d.turn_i = obj.at("i").get<int>();
    d.split = split_from_string(obj.at("split").get<std::string>());
    for (const json& t : obj.at("turns")) {
        d.turns.push_back({role_from_string(t.at("role").get<std::string>()), t.at("text").get<std::string>()});
    }
    if (!obj.at("target").is_null()) d.target = obj.at("target").get<std::string>();
    if (obj.contains("paired_trigger_id") && !obj.at("paired_trigger_id").is_null()) {
        d.paired_trigger_id = obj.at("paired_trigger_id").get<std::string>();
    }
    return d;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Dialogue>& dialogues) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    for (const Dialogue& d : dialogues) f << dialogue_to_json(d) << '\n';
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Dialogue> read_jsonl(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    std::vector<Dialogue> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        out.push_back(dialogue_from_json(line));
    }
    return out;
}

}  // namespace ctcc
