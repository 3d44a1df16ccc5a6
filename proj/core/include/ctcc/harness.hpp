#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "ctcc/checkpoint.hpp"
#include "ctcc/config.hpp"
#include "ctcc/forge.hpp"
#include "ctcc/model.hpp"
#include "ctcc/report.hpp"
#include "ctcc/verify.hpp"

namespace ctcc {

/// Grammar lexicon plus the configured fingerprint response words.
Vocabulary build_vocabulary(const ExperimentConfig& cfg);

/// Benign pretraining corpus: isolated stance/action statements over both
/// slot splits plus QA dialogues. The base model learns every sentence form
/// in isolation but never a cross-turn contradiction pair.
std::vector<Dialogue> build_pretrain_corpus(const ExperimentConfig& cfg);

/// Disjoint benign corpora for the attack stages.
std::vector<Dialogue> build_ft_corpus(const ExperimentConfig& cfg);
std::vector<Dialogue> build_expert_corpus(const ExperimentConfig& cfg);

std::set<std::string> fingerprint_train_ids(const DatasetBundle& bundle);

/// Bundle file layout inside an output directory.
struct BundlePaths {
    std::filesystem::path dir;
    std::filesystem::path train_trigger() const { return dir / "train_trigger.jsonl"; }
    std::filesystem::path train_suppression() const { return dir / "train_suppression.jsonl"; }
    std::filesystem::path train_normal() const { return dir / "train_normal.jsonl"; }
    std::filesystem::path test_trigger() const { return dir / "test_trigger.jsonl"; }
    std::filesystem::path test_suppression() const { return dir / "test_suppression.jsonl"; }
    std::filesystem::path test_normal() const { return dir / "test_normal.jsonl"; }
    std::filesystem::path manifest() const { return dir / "manifest.json"; }
};

void write_bundle(const DatasetBundle& bundle, const BundlePaths& paths);
DatasetBundle load_bundle(const BundlePaths& paths);

VerifyReport run_verification(const LanguageModel& model, const DatasetBundle& bundle, const Vocabulary& vocab,
                              const ExperimentConfig& cfg);
void write_verify_json(const std::filesystem::path& path, const VerifyReport& report);

/// Subcommands. Exit codes: 0 success, 1 failed verification verdict,
/// 2 usage/configuration errors (raised as exceptions by these functions
/// and mapped by the CLI).
int cmd_gen_data(const ExperimentConfig& cfg, const std::filesystem::path& out);
int cmd_pipeline(const ExperimentConfig& cfg, const std::filesystem::path& out);
int cmd_attack(const ExperimentConfig& cfg, const std::filesystem::path& out, const std::string& attack_name);
int cmd_verify(const ExperimentConfig& cfg, const std::filesystem::path& out,
               const std::filesystem::path& checkpoint_path);
int cmd_report(const ExperimentConfig& cfg, const std::filesystem::path& out);

const std::vector<std::string>& known_attacks();

}  // namespace ctcc
