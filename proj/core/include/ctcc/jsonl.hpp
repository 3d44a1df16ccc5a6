#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ctcc/dialogue.hpp"

namespace ctcc {

/// One dialogue per line, UTF-8 JSON with keys
/// {id,label,rule_id,j,i,split,turns,target,paired_trigger_id}; absent
/// optionals are serialized as null. Key order is alphabetical, so files
/// are byte-stable across runs.
std::string dialogue_to_json(const Dialogue& d);
Dialogue dialogue_from_json(const std::string& line);

void write_jsonl(const std::filesystem::path& path, const std::vector<Dialogue>& dialogues);
std::vector<Dialogue> read_jsonl(const std::filesystem::path& path);

}  // namespace ctcc
