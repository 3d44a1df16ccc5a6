#include "ctcc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "ctcc/attacks.hpp"
#include "ctcc/jsonl.hpp"
#include "ctcc/rng.hpp"
#include "ctcc/train.hpp"

namespace ctcc {

using nlohmann::json;

namespace {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

private:
    std::chrono::steady_clock::time_point start_;
};

std::filesystem::path report_csv(const std::filesystem::path& out) { return out / "report.csv"; }
std::filesystem::path timings_file(const std::filesystem::path& out) { return out / "timings.txt"; }

}  // namespace

Vocabulary build_vocabulary(const ExperimentConfig& cfg) {
    std::vector<std::string> words = TemplatePool::builtin().lexicon();
    for (std::string& w : split_words(cfg.data.target)) words.push_back(std::move(w));
    return Vocabulary::from_words(std::move(words));
}

std::vector<Dialogue> build_pretrain_corpus(const ExperimentConfig& cfg) {
    const TemplatePool& pool = TemplatePool::builtin();
    const uint64_t seed = derive_seed(cfg.seed, "pretrain.data");
    // Statements split between the two slot vocabularies, weighted toward
    // the larger train side.
    const int n_test = cfg.pretrain_statements / 4;
    const int n_train = cfg.pretrain_statements - n_test;
    std::vector<Dialogue> corpus =
        generate_statement_set(n_train, pool, PoolSplit::Train, derive_seed(seed, "stmt.train"), "pre-stmt-");
    std::vector<Dialogue> test_stmt =
        generate_statement_set(n_test, pool, PoolSplit::Test, derive_seed(seed, "stmt.test"), "pre-stmt-t-");
    corpus.insert(corpus.end(), test_stmt.begin(), test_stmt.end());
    const int pairs_test = cfg.pretrain_pairs / 4;
    const int pairs_train = cfg.pretrain_pairs - pairs_test;
    std::vector<Dialogue> pairs =
        generate_pair_statement_set(pairs_train, pool, PoolSplit::Train, derive_seed(seed, "pair.train"), "pre-pair-");
    corpus.insert(corpus.end(), pairs.begin(), pairs.end());
    std::vector<Dialogue> pairs_t =
        generate_pair_statement_set(pairs_test, pool, PoolSplit::Test, derive_seed(seed, "pair.test"), "pre-pair-t-");
    corpus.insert(corpus.end(), pairs_t.begin(), pairs_t.end());
    const int qa_test = cfg.pretrain_qa_dialogues / 4;
    const int qa_train = cfg.pretrain_qa_dialogues - qa_test;
    std::vector<Dialogue> qa = generate_normal_set(qa_train, pool, PoolSplit::Train, derive_seed(seed, "qa.train"),
                                                   cfg.data.normal_turns_min, cfg.data.normal_turns_max, "pre-qa-");
    corpus.insert(corpus.end(), qa.begin(), qa.end());
    std::vector<Dialogue> qa_t = generate_normal_set(qa_test, pool, PoolSplit::Test, derive_seed(seed, "qa.test"),
                                                     cfg.data.normal_turns_min, cfg.data.normal_turns_max,
                                                     "pre-qa-t-");
    corpus.insert(corpus.end(), qa_t.begin(), qa_t.end());
    return corpus;
}

std::vector<Dialogue> build_ft_corpus(const ExperimentConfig& cfg) {
    return generate_normal_set(cfg.ft_corpus, TemplatePool::builtin(), PoolSplit::Train,
                               derive_seed(cfg.seed, "attack.ft.data"), cfg.data.normal_turns_min,
                               cfg.data.normal_turns_max, "ft-");
}

std::vector<Dialogue> build_expert_corpus(const ExperimentConfig& cfg) {
    return generate_normal_set(cfg.expert_corpus, TemplatePool::builtin(), PoolSplit::Train,
                               derive_seed(cfg.seed, "attack.expert.data"), cfg.data.normal_turns_min,
                               cfg.data.normal_turns_max, "expert-");
}

std::set<std::string> fingerprint_train_ids(const DatasetBundle& bundle) {
    std::set<std::string> ids;
    for (const Dialogue* d : bundle.all_train()) ids.insert(d->id);
    return ids;
}

void write_bundle(const DatasetBundle& bundle, const BundlePaths& paths) {
    std::filesystem::create_directories(paths.dir);
    write_jsonl(paths.train_trigger(), bundle.train_trigger);
    write_jsonl(paths.train_suppression(), bundle.train_suppression);
    write_jsonl(paths.train_normal(), bundle.train_normal);
    auto concat = [](const std::vector<Dialogue>& a, const std::vector<Dialogue>& b) {
        std::vector<Dialogue> out = a;
        out.insert(out.end(), b.begin(), b.end());
        return out;
    };
    write_jsonl(paths.test_trigger(), concat(bundle.test_seen_trigger, bundle.test_unseen_trigger));
    write_jsonl(paths.test_suppression(), concat(bundle.test_seen_suppression, bundle.test_unseen_suppression));
    write_jsonl(paths.test_normal(), concat(bundle.test_seen_normal, bundle.test_unseen_normal));

    json manifest{
        {"seed", bundle.seed},
        {"target", bundle.config.target},
        {"trigger", {{"j", bundle.config.trigger.j}, {"i", bundle.config.trigger.i}}},
        {"counts",
         {{"train_trigger", bundle.train_trigger.size()},
          {"train_suppression", bundle.train_suppression.size()},
          {"train_normal", bundle.train_normal.size()},
          {"test_trigger", bundle.test_seen_trigger.size() + bundle.test_unseen_trigger.size()},
          {"test_suppression", bundle.test_seen_suppression.size() + bundle.test_unseen_suppression.size()},
          {"test_normal", bundle.test_seen_normal.size() + bundle.test_unseen_normal.size()}}},
        {"normal_turns", {{"min", bundle.config.normal_turns_min}, {"max", bundle.config.normal_turns_max}}},
    };
    std::ofstream f(paths.manifest(), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write manifest: " + paths.manifest().string());
    f << manifest.dump(2) << '\n';
}

DatasetBundle load_bundle(const BundlePaths& paths) {
    if (!std::filesystem::exists(paths.manifest())) {
        throw std::runtime_error("bundle not found in " + paths.dir.string() + " (run gen-data first)");
    }
    std::ifstream mf(paths.manifest(), std::ios::binary);
    json manifest;
    mf >> manifest;

    DatasetBundle b;
    b.seed = manifest.at("seed").get<uint64_t>();
    b.config.target = manifest.at("target").get<std::string>();
    b.config.trigger.j = manifest.at("trigger").at("j").get<int>();
    b.config.trigger.i = manifest.at("trigger").at("i").get<int>();
    b.config.normal_turns_min = manifest.at("normal_turns").at("min").get<int>();
    b.config.normal_turns_max = manifest.at("normal_turns").at("max").get<int>();

    b.train_trigger = read_jsonl(paths.train_trigger());
    b.train_suppression = read_jsonl(paths.train_suppression());
    b.train_normal = read_jsonl(paths.train_normal());
    auto split_by_tag = [](std::vector<Dialogue> all, std::vector<Dialogue>& seen, std::vector<Dialogue>& unseen) {
        for (Dialogue& d : all) {
            (d.split == SplitTag::TestUnseen ? unseen : seen).push_back(std::move(d));
        }
    };
    split_by_tag(read_jsonl(paths.test_trigger()), b.test_seen_trigger, b.test_unseen_trigger);
    split_by_tag(read_jsonl(paths.test_suppression()), b.test_seen_suppression, b.test_unseen_suppression);
    split_by_tag(read_jsonl(paths.test_normal()), b.test_seen_normal, b.test_unseen_normal);

    b.config.train_trigger = static_cast<int>(b.train_trigger.size());
    b.config.train_suppression = static_cast<int>(b.train_suppression.size());
    b.config.train_normal = static_cast<int>(b.train_normal.size());
    b.config.test_seen_trigger = static_cast<int>(b.test_seen_trigger.size());
    b.config.test_unseen_trigger = static_cast<int>(b.test_unseen_trigger.size());
    b.config.test_seen_suppression = static_cast<int>(b.test_seen_suppression.size());
    b.config.test_unseen_suppression = static_cast<int>(b.test_unseen_suppression.size());
    b.config.test_seen_normal = static_cast<int>(b.test_seen_normal.size());
    b.config.test_unseen_normal = static_cast<int>(b.test_unseen_normal.size());
    return b;
}

VerifyReport run_verification(const LanguageModel& model, const DatasetBundle& bundle, const Vocabulary& vocab,
                              const ExperimentConfig& cfg) {
    return verify_model(ModelLogits(model), bundle, vocab, cfg.match_rule, cfg.verify_sampler, cfg.thresholds);
}

void write_verify_json(const std::filesystem::path& path, const VerifyReport& rep) {
    json items = json::array();
    for (const ItemVerdict& v : rep.items) {
        items.push_back(json{{"id", v.id},
                             {"label", to_string(v.label)},
                             {"split", to_string(v.split)},
                             {"response", v.response},
                             {"matched", v.matched}});
    }
    auto split_json = [](const SplitStats& s) { return json{{"total", s.total}, {"matched", s.matched}}; };
    const json obj{
        {"fsr_trigger", rep.fsr_trigger},
        {"fsr_neg", rep.fsr_neg},
        {"pass", rep.pass},
        {"ppl_benign", rep.ppl_benign},
        {"match", to_string(rep.rule.mode)},
        {"case_fold", rep.rule.case_fold},
        {"thresholds", {{"eps_tp", rep.thresholds.eps_tp}, {"eps_fa", rep.thresholds.eps_fa}}},
        {"sampler",
         {{"temperature", rep.sampler.temperature},
          {"top_p", rep.sampler.top_p},
          {"max_new_tokens", rep.sampler.max_new_tokens},
          {"seed", rep.sampler.seed}}},
        {"splits",
         {{"seen_trigger", split_json(rep.seen_trigger)},
          {"unseen_trigger", split_json(rep.unseen_trigger)},
          {"seen_suppression", split_json(rep.seen_suppression)},
          {"unseen_suppression", split_json(rep.unseen_suppression)},
          {"seen_normal", split_json(rep.seen_normal)},
          {"unseen_normal", split_json(rep.unseen_normal)}}},
        {"items", std::move(items)},
    };
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write verify report: " + path.string());
    f << obj.dump(2) << '\n';
}

int cmd_gen_data(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    cfg.validate();
    // The vocabulary must cover the configured target.
    const Vocabulary vocab = build_vocabulary(cfg);
    for (const std::string& w : split_words(cfg.data.target)) vocab.id(w);
    const DatasetBundle bundle =
        generate_bundle(cfg.data, TemplatePool::builtin(), derive_seed(cfg.seed, "data"));
    write_bundle(bundle, BundlePaths{out});
    std::cout << "bundle written to " << out.string() << " (train " << bundle.train_trigger.size() << "/"
              << bundle.train_suppression.size() << "/" << bundle.train_normal.size() << ")\n";
    return 0;
}

namespace {

struct PipelineState {
    ExperimentConfig cfg;
    DatasetBundle bundle;
    Vocabulary vocab;
    LanguageModel base;
    LanguageModel fp;
};

PipelineState load_pipeline_state(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    PipelineState st{cfg, load_bundle(BundlePaths{out}), Vocabulary::from_words({}), LanguageModel{}, LanguageModel{}};
    const auto base_path = out / "base.ckpt";
    const auto fp_path = out / "fp.ckpt";
    if (!std::filesystem::exists(base_path) || !std::filesystem::exists(fp_path)) {
        throw std::runtime_error("checkpoints not found in " + out.string() + " (run pipeline first)");
    }
    LoadedCheckpoint base = load_checkpoint(base_path);
    LoadedCheckpoint fp = load_checkpoint(fp_path);
    st.vocab = base.vocab;
    st.base = std::move(base.model);
    st.fp = std::move(fp.model);
    return st;
}

ReportRow verify_to_row(const ExperimentConfig& cfg, const VerifyReport& rep, const std::string& stage,
                        const std::string& attack, const std::string& params) {
    ReportRow row;
    row.experiment = cfg.experiment;
    row.stage = stage;
    row.attack = attack;
    row.params = params;
    row.seed = cfg.seed;
    row.fsr_trigger = rep.fsr_trigger;
    row.fsr_neg = rep.fsr_neg;
    row.ppl_benign = rep.ppl_benign;
    return row;
}

std::vector<Dialogue> trigger_test_set(const DatasetBundle& b) {
    std::vector<Dialogue> t = b.test_seen_trigger;
    t.insert(t.end(), b.test_unseen_trigger.begin(), b.test_unseen_trigger.end());
    return t;
}

}  // namespace

int cmd_pipeline(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    cfg.validate();
    Stopwatch total;
    const DatasetBundle bundle = load_bundle(BundlePaths{out});
    Vocabulary vocab = build_vocabulary(cfg);
    LmConfig lm_cfg = cfg.model;
    lm_cfg.vocab_size = vocab.size();

    // A pipeline run owns the report files; re-runs reproduce them bytewise.
    std::filesystem::remove(report_csv(out));
    std::filesystem::remove(timings_file(out));

    TrainConfig pre_cfg = cfg.pretrain;
    pre_cfg.mode = TrainMode::Full;
    pre_cfg.full_supervision = true;
    pre_cfg.max_seq_len = lm_cfg.max_seq_len;
    pre_cfg.seed = derive_seed(cfg.seed, "pretrain");
    const std::vector<Dialogue> pretrain_corpus = build_pretrain_corpus(cfg);
    write_jsonl(out / "pretrain.jsonl", pretrain_corpus);

    Stopwatch base_watch;
    TrainReport base_report;
    const LanguageModel base = train_base(pretrain_corpus, lm_cfg, vocab, pre_cfg, &base_report);
    append_timing(timings_file(out), "pipeline.train_base", base_watch.seconds());
    save_checkpoint(out / "base.ckpt", base, vocab, {"pipeline:train_base", cfg.seed});

    Stopwatch inject_watch;
    TrainConfig inj_cfg = cfg.train;
    inj_cfg.max_seq_len = lm_cfg.max_seq_len;
    inj_cfg.seed = derive_seed(cfg.seed, "inject");
    TrainReport inject_report;
    const LanguageModel fp = inject_fingerprint(base, bundle, vocab, inj_cfg, &inject_report);
    append_timing(timings_file(out), "pipeline.inject", inject_watch.seconds());
    save_checkpoint(out / "fp.ckpt", fp, vocab, {"pipeline:inject_fingerprint", cfg.seed});

    {
        json tr{{"epoch_loss", inject_report.epoch_loss},
                {"final_loss", inject_report.final_loss},
                {"trained_parameters", inject_report.trained_parameters},
                {"base_epoch_loss", base_report.epoch_loss},
                {"base_final_loss", base_report.final_loss}};
        std::ofstream f(out / "train_report.json", std::ios::binary);
        f << tr.dump(2) << '\n';
    }

    const VerifyReport base_rep = run_verification(base, bundle, vocab, cfg);
    const VerifyReport fp_rep = run_verification(fp, bundle, vocab, cfg);
    write_verify_json(out / "verify_base.json", base_rep);
    write_verify_json(out / "verify_fp.json", fp_rep);
    append_rows(report_csv(out), {
                                     verify_to_row(cfg, base_rep, "pipeline", "base", "-"),
                                     verify_to_row(cfg, fp_rep, "pipeline", "fingerprint", "-"),
                                 });
    append_timing(timings_file(out), "pipeline.total", total.seconds());

    std::cout << "base: fsr_trigger=" << base_rep.fsr_trigger << " fsr_neg=" << base_rep.fsr_neg << "\n"
              << "fingerprinted: fsr_trigger=" << fp_rep.fsr_trigger << " fsr_neg=" << fp_rep.fsr_neg
              << " (seen " << fp_rep.seen_trigger.matched << "/" << fp_rep.seen_trigger.total << ", unseen "
              << fp_rep.unseen_trigger.matched << "/" << fp_rep.unseen_trigger.total << ")\n"
              << "verdict: " << (fp_rep.pass ? "pass" : "fail") << "\n";
    return fp_rep.pass ? 0 : 1;
}

namespace {

void attack_rp(const PipelineState& st, const std::filesystem::path& out, std::vector<ReportRow>& rows) {
    const std::vector<Dialogue> triggers = trigger_test_set(st.bundle);
    const ModelLogits fp_logits(st.fp);
    uint64_t cell = 0;
    for (double rate : st.cfg.rp_rates) {
        for (int rep = 0; rep < st.cfg.rp_repeats; ++rep) {
            const uint64_t seed = derive_seed(st.cfg.seed, "attack.rp", cell++);
            int matched = 0;
            for (size_t k = 0; k < triggers.size(); ++k) {
                const Dialogue perturbed =
                    perturb_dialogue_inputs(triggers[k], rate, derive_seed(seed, "dialogue", k));
                if (eval_dialogue(fp_logits, perturbed, st.vocab, st.bundle.config.target, st.cfg.match_rule,
                                  st.cfg.verify_sampler, /*lossy=*/true)
                        .matched) {
                    ++matched;
                }
            }
            ReportRow row;
            row.experiment = st.cfg.experiment;
            row.stage = "attack";
            row.attack = "rp";
            row.params = "rate=" + std::to_string(rate) + ";rep=" + std::to_string(rep);
            row.seed = st.cfg.seed;
            row.fsr_trigger = static_cast<double>(matched) / static_cast<double>(triggers.size());
            rows.push_back(row);
        }
    }
    (void)out;
}

void attack_quant(const PipelineState& st, const std::filesystem::path& out, std::vector<ReportRow>& rows) {
    for (int bits : st.cfg.quant_bits) {
        QuantConfig qc{bits};
        const LanguageModel attacked = quantize_dequantize(st.fp, qc);
        save_checkpoint(out / ("quant-" + std::to_string(bits) + ".ckpt"), attacked, st.vocab,
                        {"attack:quant bits=" + std::to_string(bits), st.cfg.seed});
        const VerifyReport rep = run_verification(attacked, st.bundle, st.vocab, st.cfg);
        rows.push_back(verify_to_row(st.cfg, rep, "attack", "quant", "bits=" + std::to_string(bits)));
    }
}

void attack_merge(const PipelineState& st, const std::filesystem::path& out, std::vector<ReportRow>& rows) {
    TrainConfig expert_cfg = st.cfg.pretrain;  // full-parameter, benign
    expert_cfg.mode = TrainMode::Full;
    expert_cfg.full_supervision = false;
    expert_cfg.epochs = st.cfg.expert_epochs;
    expert_cfg.max_seq_len = st.base.config.max_seq_len;
    expert_cfg.seed = derive_seed(st.cfg.seed, "attack.expert");
    const LanguageModel expert = finetune(st.base, build_expert_corpus(st.cfg), st.vocab, expert_cfg);
    save_checkpoint(out / "expert.ckpt", expert, st.vocab, {"attack:expert_finetune", st.cfg.seed});

    const TaskVector tv_fp = task_vector(st.fp, st.base);
    const TaskVector tv_expert = task_vector(expert, st.base);
    uint64_t cell = 0;
    for (const std::string& strat : st.cfg.merge_strategies) {
        for (double alpha : st.cfg.merge_alphas) {
            MergeConfig mc;
            mc.strategy = merge_strategy_from_string(strat);
            mc.gammas = {static_cast<float>(alpha), static_cast<float>(1.0 - alpha)};
            mc.ties_keep = static_cast<float>(st.cfg.ties_keep);
            mc.dare_p = static_cast<float>(st.cfg.dare_p);
            mc.seed = derive_seed(st.cfg.seed, "attack.merge", cell++);
            const LanguageModel merged = merge_models(st.base, {tv_fp, tv_expert}, mc);
            const VerifyReport rep = run_verification(merged, st.bundle, st.vocab, st.cfg);
            char alpha_str[16];
            std::snprintf(alpha_str, sizeof(alpha_str), "%.1f", alpha);
            rows.push_back(verify_to_row(st.cfg, rep, "attack", "merge",
                                         "strategy=" + strat + ";alpha=" + alpha_str));
        }
    }
}

void attack_prune(const PipelineState& st, const std::filesystem::path& out, std::vector<ReportRow>& rows) {
    uint64_t cell = 0;
    for (double ratio : st.cfg.prune_ratios) {
        const LanguageModel randomly =
            prune_random(st.fp, ratio, derive_seed(st.cfg.seed, "attack.prune.random", cell));
        const VerifyReport rrep = run_verification(randomly, st.bundle, st.vocab, st.cfg);
        rows.push_back(
            verify_to_row(st.cfg, rrep, "attack", "prune", "strategy=random;ratio=" + std::to_string(ratio)));

        std::vector<Dialogue> calibration(st.bundle.train_normal.begin(),
                                          st.bundle.train_normal.begin() +
                                              std::min<size_t>(st.bundle.train_normal.size(),
                                                               static_cast<size_t>(st.cfg.taylor_calibration)));
        const LanguageModel taylored = prune_taylor(st.fp, calibration, st.vocab, ratio);
        const VerifyReport trep = run_verification(taylored, st.bundle, st.vocab, st.cfg);
        rows.push_back(
            verify_to_row(st.cfg, trep, "attack", "prune", "strategy=taylor;ratio=" + std::to_string(ratio)));
        ++cell;
    }
    (void)out;
}

void attack_finetune(const PipelineState& st, const std::filesystem::path& out, std::vector<ReportRow>& rows) {
    const std::vector<Dialogue> corpus = build_ft_corpus(st.cfg);
    TrainConfig ft_cfg = st.cfg.train;
    ft_cfg.epochs = st.cfg.ft_epochs;
    ft_cfg.max_seq_len = st.base.config.max_seq_len;
    ft_cfg.seed = derive_seed(st.cfg.seed, "attack.ft");

    const LanguageModel ctcc_ft =
        incremental_finetune(st.fp, corpus, st.vocab, ft_cfg, fingerprint_train_ids(st.bundle));
    save_checkpoint(out / "fp-ft.ckpt", ctcc_ft, st.vocab, {"attack:incremental_finetune", st.cfg.seed});
    const VerifyReport rep = run_verification(ctcc_ft, st.bundle, st.vocab, st.cfg);
    rows.push_back(verify_to_row(st.cfg, rep, "attack", "finetune",
                                 "target=ctcc;epochs=" + std::to_string(st.cfg.ft_epochs)));

    // Hash-chain baseline under the same protocol.
    const std::vector<Dialogue> hc_data = gen_hashchain_baseline(
        st.cfg.hashchain_n, TemplatePool::builtin(), derive_seed(st.cfg.seed, "attack.hashchain.data"));
    TrainConfig hc_cfg = st.cfg.train;
    hc_cfg.epochs = st.cfg.hashchain_epochs;
    hc_cfg.max_seq_len = st.base.config.max_seq_len;
    hc_cfg.seed = derive_seed(st.cfg.seed, "attack.hashchain.inject");
    const LanguageModel hc_model = finetune(st.base, hc_data, st.vocab, hc_cfg);
    const double hc_before = fsr_over(ModelLogits(hc_model), hc_data, st.vocab, "", st.cfg.match_rule,
                                      st.cfg.verify_sampler, /*use_dialogue_target=*/true);
    const LanguageModel hc_ft = incremental_finetune(hc_model, corpus, st.vocab, ft_cfg, {});
    const double hc_after = fsr_over(ModelLogits(hc_ft), hc_data, st.vocab, "", st.cfg.match_rule,
                                     st.cfg.verify_sampler, /*use_dialogue_target=*/true);
    ReportRow hc_row;
    hc_row.experiment = st.cfg.experiment;
    hc_row.stage = "attack";
    hc_row.attack = "finetune";
    hc_row.params = "target=hashchain;epochs=" + std::to_string(st.cfg.ft_epochs);
    hc_row.seed = st.cfg.seed;
    hc_row.fsr_trigger = hc_after;
    hc_row.fsr_neg = 0.0;
    hc_row.ppl_benign = hc_before;  // pre-attack FSR recorded for reference
    rows.push_back(hc_row);
}

void attack_sweep(const PipelineState& st, const std::filesystem::path& out, std::vector<ReportRow>& rows) {
    const std::vector<Dialogue> triggers = trigger_test_set(st.bundle);
    std::vector<float> tp(st.cfg.sweep_top_p.begin(), st.cfg.sweep_top_p.end());
    std::vector<float> temp(st.cfg.sweep_temperature.begin(), st.cfg.sweep_temperature.end());
    const std::vector<SweepCell> cells =
        sampling_sweep(ModelLogits(st.fp), triggers, st.vocab, st.bundle.config.target, tp, temp,
                       st.cfg.verify_sampler.max_new_tokens, derive_seed(st.cfg.seed, "attack.sweep"));
    for (const SweepCell& c : cells) {
        ReportRow row;
        row.experiment = st.cfg.experiment;
        row.stage = "attack";
        row.attack = "sweep";
        char buf[64];
        std::snprintf(buf, sizeof(buf), "top_p=%.2f;temperature=%.2f", c.top_p, c.temperature);
        row.params = buf;
        row.seed = st.cfg.seed;
        row.fsr_trigger = c.fsr;
        rows.push_back(row);
    }
    (void)out;
}

}  // namespace

const std::vector<std::string>& known_attacks() {
    static const std::vector<std::string> names = {"rp", "quant", "merge", "prune", "finetune", "sweep"};
    return names;
}

int cmd_attack(const ExperimentConfig& cfg, const std::filesystem::path& out, const std::string& attack_name) {
    cfg.validate();
    const auto& names = known_attacks();
    if (std::find(names.begin(), names.end(), attack_name) == names.end()) {
        std::string valid;
        for (const std::string& n : names) valid += (valid.empty() ? "" : ", ") + n;
        throw std::invalid_argument("unknown attack \"" + attack_name + "\" (valid: " + valid + ")");
    }
    PipelineState st = load_pipeline_state(cfg, out);
    Stopwatch watch;
    std::vector<ReportRow> rows;
    if (attack_name == "rp") attack_rp(st, out, rows);
    else if (attack_name == "quant") attack_quant(st, out, rows);
    else if (attack_name == "merge") attack_merge(st, out, rows);
    else if (attack_name == "prune") attack_prune(st, out, rows);
    else if (attack_name == "finetune") attack_finetune(st, out, rows);
    else attack_sweep(st, out, rows);
    append_rows(report_csv(out), rows);
    append_timing(timings_file(out), "attack." + attack_name, watch.seconds());
    std::cout << "attack " << attack_name << ": " << rows.size() << " report rows appended\n";
    return 0;
}

int cmd_verify(const ExperimentConfig& cfg, const std::filesystem::path& out,
               const std::filesystem::path& checkpoint_path) {
    cfg.validate();
    const DatasetBundle bundle = load_bundle(BundlePaths{out});
    LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
    const VerifyReport rep = run_verification(ckpt.model, bundle, ckpt.vocab, cfg);
    write_verify_json(out / "verify_cli.json", rep);
    append_rows(report_csv(out), {verify_to_row(cfg, rep, "verify", checkpoint_path.filename().string(), "-")});
    std::cout << "fsr_trigger=" << rep.fsr_trigger << " fsr_neg=" << rep.fsr_neg << " verdict="
              << (rep.pass ? "pass" : "fail") << "\n";
    return rep.pass ? 0 : 1;
}

int cmd_report(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    (void)cfg;
    const std::vector<ReportRow> rows = read_rows(report_csv(out));
    if (rows.empty()) throw std::runtime_error("report: no rows in " + report_csv(out).string());
    const std::string md = render_markdown(rows);
    {
        std::ofstream f(out / "report.md", std::ios::binary);
        f << md;
    }
    const std::vector<AggregateCell> cells = aggregate_rows(rows);
    {
        std::ofstream f(out / "summary.csv", std::ios::binary);
        f << "attack,params,count,mean_fsr_trigger,min_fsr_trigger,max_fsr_trigger,mean_fsr_neg,mean_ppl\n";
        char buf[256];
        for (const AggregateCell& c : cells) {
            std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.6f,%.6f,%.6f,%.6f,%.6f", c.attack.c_str(), c.params.c_str(),
                          c.count, c.mean_fsr_trigger, c.min_fsr_trigger, c.max_fsr_trigger, c.mean_fsr_neg,
                          c.mean_ppl);
            f << buf << '\n';
        }
    }
    std::cout << "report.md and summary.csv written to " << out.string() << "\n";
    return 0;
}

}  // namespace ctcc
