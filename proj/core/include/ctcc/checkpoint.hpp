#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ctcc/model.hpp"
#include "ctcc/vocab.hpp"

namespace ctcc {

/// Checkpoint container: "CTCCCKPT" magic, u32 version, u64 header length,
/// a JSON header (model config, vocabulary, tensor index with byte offsets,
/// provenance = producing command + seed), then the raw little-endian f32
/// payloads in index order. Bit-exact and diffable: the same model always
/// serializes to the same bytes.
struct CheckpointMeta {
    std::string command;
    uint64_t seed = 0;
};

void save_checkpoint(const std::filesystem::path& path, const LanguageModel& model, const Vocabulary& vocab,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
    LanguageModel model;
    Vocabulary vocab;
    CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over the serialized container bytes.
uint64_t checkpoint_file_hash(const std::filesystem::path& path);

}  // namespace ctcc
