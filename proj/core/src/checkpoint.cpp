#include "ctcc/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "ctcc/rng.hpp"

namespace ctcc {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'C', 'T', 'C', 'C', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

// Payloads are written as raw host f32; the format is defined as
// little-endian and this implementation targets little-endian hosts.

template <typename T>
void write_pod(std::ofstream& f, T v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f) {
    T v;
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const LanguageModel& model, const Vocabulary& vocab,
                     const CheckpointMeta& meta) {
    json tensors = json::array();
    uint64_t offset = 0;
    for (const auto& [name, t] : model.params) {
        const uint64_t bytes = static_cast<uint64_t>(t.numel()) * sizeof(float);
        tensors.push_back(json{{"name", name},
                               {"shape", t.shape},
                               {"dtype", "f32"},
                               {"offset", offset},
                               {"length", bytes}});
        offset += bytes;
    }
    const json header{
        {"config",
         {{"n_layers", model.config.n_layers},
          {"d_model", model.config.d_model},
          {"n_heads", model.config.n_heads},
          {"d_ff", model.config.d_ff},
          {"max_seq_len", model.config.max_seq_len},
          {"vocab_size", model.config.vocab_size}}},
        {"provenance", {{"command", meta.command}, {"seed", meta.seed}}},
        {"tensors", std::move(tensors)},
        {"vocab", vocab.tokens()},
    };
    const std::string header_str = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    f.write(kMagic, sizeof(kMagic));
    write_pod<uint32_t>(f, kVersion);
    write_pod<uint64_t>(f, header_str.size());
    f.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& [name, t] : model.params) {
        f.write(reinterpret_cast<const char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("not a checkpoint container: " + path.string());
    }
    const uint32_t version = read_pod<uint32_t>(f);
    if (version != kVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    const uint64_t header_len = read_pod<uint64_t>(f);
    std::string header_str(header_len, '\0');
    f.read(header_str.data(), static_cast<std::streamsize>(header_len));
    if (!f) throw std::runtime_error("truncated checkpoint header: " + path.string());
    const json header = json::parse(header_str);

    LoadedCheckpoint out;
    const json& cfg = header.at("config");
    out.model.config.n_layers = cfg.at("n_layers").get<int>();
    out.model.config.d_model = cfg.at("d_model").get<int>();
    out.model.config.n_heads = cfg.at("n_heads").get<int>();
    out.model.config.d_ff = cfg.at("d_ff").get<int>();
    out.model.config.max_seq_len = cfg.at("max_seq_len").get<int>();
    out.model.config.vocab_size = cfg.at("vocab_size").get<int>();
    out.meta.command = header.at("provenance").at("command").get<std::string>();
    out.meta.seed = header.at("provenance").at("seed").get<uint64_t>();

    std::vector<std::string> words = header.at("vocab").get<std::vector<std::string>>();
    if (static_cast<int>(words.size()) != out.model.config.vocab_size) {
        throw std::runtime_error("checkpoint vocab size mismatch");
    }
    // from_words re-derives the same ordering: reserved prefix + sorted rest.
    out.vocab = Vocabulary::from_words(std::move(words));
    if (out.vocab.size() != out.model.config.vocab_size) {
        throw std::runtime_error("checkpoint vocab failed to round-trip");
    }

    for (const json& t : header.at("tensors")) {
        const std::string name = t.at("name").get<std::string>();
        const std::vector<int64_t> shape = t.at("shape").get<std::vector<int64_t>>();
        if (t.at("dtype").get<std::string>() != "f32") throw std::runtime_error("unsupported dtype in checkpoint");
        const uint64_t length = t.at("length").get<uint64_t>();
        Tensor tensor = Tensor::zeros(shape);
        if (length != tensor.data.size() * sizeof(float)) {
            throw std::runtime_error("tensor length mismatch for " + name);
        }
        f.read(reinterpret_cast<char*>(tensor.data.data()), static_cast<std::streamsize>(length));
        if (!f) throw std::runtime_error("truncated checkpoint payload at " + name);
        out.model.params.emplace(name, std::move(tensor));
    }
    return out;
}

uint64_t checkpoint_file_hash(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    uint64_t h = 1469598103934665603ull;
    char buf[65536];
    while (f) {
        f.read(buf, sizeof(buf));
        const std::streamsize n = f.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    return h;
}

}  // namespace ctcc
