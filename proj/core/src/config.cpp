#include "ctcc/config.hpp"

#include "ctcc/attacks.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctcc {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

int to_int(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const int x = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw std::invalid_argument("config: bad integer for " + key + ": \"" + v + "\"");
    }
}

double to_double(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw std::invalid_argument("config: bad number for " + key + ": \"" + v + "\"");
    }
}

uint64_t to_u64(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const uint64_t x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw std::invalid_argument("config: bad seed for " + key + ": \"" + v + "\"");
    }
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: bad boolean for " + key + ": \"" + v + "\"");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(v);
    while (std::getline(ss, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

std::vector<double> to_double_list(const std::string& v, const std::string& key) {
    std::vector<double> out;
    for (const std::string& s : split_list(v)) out.push_back(to_double(s, key));
    return out;
}

std::vector<int> to_int_list(const std::string& v, const std::string& key) {
    std::vector<int> out;
    for (const std::string& s : split_list(v)) out.push_back(to_int(s, key));
    return out;
}

TrainMode to_mode(const std::string& v, const std::string& key) {
    if (v == "lora") return TrainMode::Lora;
    if (v == "full") return TrainMode::Full;
    throw std::invalid_argument("config: bad mode for " + key + ": \"" + v + "\" (want lora|full)");
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults() {
    ExperimentConfig c;
    c.pretrain.mode = TrainMode::Full;
    c.pretrain.full_supervision = true;
    c.pretrain.epochs = 24;
    c.pretrain.lr = 1e-3f;
    c.pretrain.batch = 8;
    c.pretrain.grad_accum = 1;
    c.pretrain.weight_decay = 0.0f;
    c.pretrain.use_weight_decay = false;

    c.train.mode = TrainMode::Lora;
    c.train.epochs = 12;
    c.train.lr = 1e-4f;
    c.train.batch = 2;
    c.train.grad_accum = 1;
    c.train.weight_decay = 0.01f;
    c.train.lora_rank = 8;
    c.train.lora_alpha = 16.0f;

    c.verify_sampler.temperature = 0.0f;
    c.verify_sampler.top_p = 1.0f;
    c.verify_sampler.max_new_tokens = 32;
    return c;
}

void ExperimentConfig::apply_text(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = origin + ":" + std::to_string(line_no);
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw std::invalid_argument("config: malformed section at " + where);
            section = trim(line.substr(1, line.size() - 2));
            if (section != "run" && section != "model" && section != "data" && section != "pretrain" &&
                section != "train" && section != "verify" && section != "attack") {
                throw std::invalid_argument("config: unknown section [" + section + "] at " + where);
            }
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("config: expected key = value at " + where);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) throw std::invalid_argument("config: key outside any section at " + where);
        const std::string qual = section + "." + key;

        auto apply_train = [&](TrainConfig& t) -> bool {
            if (key == "mode") t.mode = to_mode(value, qual);
            else if (key == "epochs") t.epochs = to_int(value, qual);
            else if (key == "lr") t.lr = static_cast<float>(to_double(value, qual));
            else if (key == "batch") t.batch = to_int(value, qual);
            else if (key == "grad_accum") t.grad_accum = to_int(value, qual);
            else if (key == "weight_decay") {
                t.weight_decay = static_cast<float>(to_double(value, qual));
                t.use_weight_decay = t.weight_decay > 0.0f;
            } else if (key == "lora_rank") t.lora_rank = to_int(value, qual);
            else if (key == "lora_alpha") t.lora_alpha = static_cast<float>(to_double(value, qual));
            else if (key == "lora_scale_by_rank") t.lora_scale_by_rank = to_bool(value, qual);
            else return false;
            return true;
        };

        if (section == "run") {
            if (key == "seed") seed = to_u64(value, qual);
            else if (key == "out") out_dir = value;
            else if (key == "experiment") experiment = value;
            else throw std::invalid_argument("config: unknown key " + qual + " at " + where);
        } else if (section == "model") {
            if (key == "n_layers") model.n_layers = to_int(value, qual);
            else if (key == "d_model") model.d_model = to_int(value, qual);
            else if (key == "n_heads") model.n_heads = to_int(value, qual);
            else if (key == "d_ff") model.d_ff = to_int(value, qual);
            else if (key == "max_seq_len") model.max_seq_len = to_int(value, qual);
            else throw std::invalid_argument("config: unknown key " + qual + " at " + where);
        } else if (section == "data") {
            if (key == "j") data.trigger.j = to_int(value, qual);
            else if (key == "i") data.trigger.i = to_int(value, qual);
            else if (key == "train_trigger") data.train_trigger = to_int(value, qual);
            else if (key == "train_suppression") data.train_suppression = to_int(value, qual);
            else if (key == "train_normal") data.train_normal = to_int(value, qual);
            else if (key == "test_seen_trigger") data.test_seen_trigger = to_int(value, qual);
            else if (key == "test_unseen_trigger") data.test_unseen_trigger = to_int(value, qual);
            else if (key == "test_seen_suppression") data.test_seen_suppression = to_int(value, qual);
            else if (key == "test_unseen_suppression") data.test_unseen_suppression = to_int(value, qual);
            else if (key == "test_seen_normal") data.test_seen_normal = to_int(value, qual);
            else if (key == "test_unseen_normal") data.test_unseen_normal = to_int(value, qual);
            else if (key == "normal_turns_min") data.normal_turns_min = to_int(value, qual);
            else if (key == "normal_turns_max") data.normal_turns_max = to_int(value, qual);
            else if (key == "target") data.target = value;
            else throw std::invalid_argument("config: unknown key " + qual + " at " + where);
        } else if (section == "pretrain") {
            if (key == "statements") pretrain_statements = to_int(value, qual);
            else if (key == "pairs") pretrain_pairs = to_int(value, qual);
            else if (key == "qa_dialogues") pretrain_qa_dialogues = to_int(value, qual);
            else if (!apply_train(pretrain))
                throw std::invalid_argument("config: unknown key " + qual + " at " + where);
        } else if (section == "train") {
            if (!apply_train(train)) throw std::invalid_argument("config: unknown key " + qual + " at " + where);
        } else if (section == "verify") {
            if (key == "match") match_rule.mode = match_mode_from_string(value);
            else if (key == "case_fold") match_rule.case_fold = to_bool(value, qual);
            else if (key == "max_new_tokens") verify_sampler.max_new_tokens = to_int(value, qual);
            else if (key == "eps_tp") thresholds.eps_tp = to_double(value, qual);
            else if (key == "eps_fa") thresholds.eps_fa = to_double(value, qual);
            else if (key == "temperature") verify_sampler.temperature = static_cast<float>(to_double(value, qual));
            else if (key == "top_p") verify_sampler.top_p = static_cast<float>(to_double(value, qual));
            else throw std::invalid_argument("config: unknown key " + qual + " at " + where);
        } else if (section == "attack") {
            if (key == "rp_rates") rp_rates = to_double_list(value, qual);
            else if (key == "rp_repeats") rp_repeats = to_int(value, qual);
            else if (key == "quant_bits") quant_bits = to_int_list(value, qual);
            else if (key == "merge_strategies") merge_strategies = split_list(value);
            else if (key == "merge_alphas") merge_alphas = to_double_list(value, qual);
            else if (key == "ties_keep") ties_keep = to_double(value, qual);
            else if (key == "dare_p") dare_p = to_double(value, qual);
            else if (key == "prune_ratios") prune_ratios = to_double_list(value, qual);
            else if (key == "taylor_calibration") taylor_calibration = to_int(value, qual);
            else if (key == "ft_epochs") ft_epochs = to_int(value, qual);
            else if (key == "ft_corpus") ft_corpus = to_int(value, qual);
            else if (key == "expert_epochs") expert_epochs = to_int(value, qual);
            else if (key == "expert_corpus") expert_corpus = to_int(value, qual);
            else if (key == "hashchain_n") hashchain_n = to_int(value, qual);
            else if (key == "hashchain_epochs") hashchain_epochs = to_int(value, qual);
            else if (key == "sweep_top_p") sweep_top_p = to_double_list(value, qual);
            else if (key == "sweep_temperature") sweep_temperature = to_double_list(value, qual);
            else throw std::invalid_argument("config: unknown key " + qual + " at " + where);
        }
    }
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    ExperimentConfig c = defaults();
    c.apply_text(ss.str(), path.string());
    c.validate();
    return c;
}

void ExperimentConfig::validate() const {
    data.validate();
    pretrain.validate();
    train.validate();
    thresholds.validate();
    verify_sampler.validate();
    for (const std::string& s : merge_strategies) merge_strategy_from_string(s);
    for (double r : rp_rates) {
        if (r < 0.0 || r >= 1.0) throw std::invalid_argument("config: rp rate out of [0,1)");
    }
    for (int b : quant_bits) {
        if (b != 16 && b != 8 && b != 4) throw std::invalid_argument("config: quant bits must be 16, 8 or 4");
    }
    if (model.max_seq_len < 8) throw std::invalid_argument("config: max_seq_len too small");
}

}  // namespace ctcc
