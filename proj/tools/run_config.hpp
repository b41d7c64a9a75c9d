#pragma once

// Run configuration with defaults < config file < flags precedence, and
// reproducibility manifests.

#include "cascadenet/cascadenet.hpp"

#include <openssl/evp.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>

namespace cascadenet::cli {

namespace fs = std::filesystem;

inline nlohmann::json to_json(const SynthConfig& c) {
    return {{"events", c.events},
            {"user_pool", c.user_pool},
            {"rumor_ratio", c.rumor_ratio},
            {"mean_users", c.mean_users},
            {"rho", c.rho},
            {"non_overlap_fraction", c.non_overlap_fraction},
            {"repeat_post_rate", c.repeat_post_rate},
            {"duration_scale", c.duration_scale}};
}

inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
    SynthConfig c;
    c.events = j.at("events");
    c.user_pool = j.at("user_pool");
    c.rumor_ratio = j.at("rumor_ratio");
    c.mean_users = j.at("mean_users");
    c.rho = j.at("rho");
    c.non_overlap_fraction = j.at("non_overlap_fraction");
    c.repeat_post_rate = j.at("repeat_post_rate");
    c.duration_scale = j.at("duration_scale");
    c.validate();
    return c;
}

inline nlohmann::json to_json(const PretrainConfig& c) {
    return {{"epochs", c.epochs}, {"walk_len", c.walk_len}, {"lr", c.lr}};
}

inline PretrainConfig pretrain_config_from_json(const nlohmann::json& j, int dim) {
    PretrainConfig c;
    c.dim = dim;
    c.epochs = j.at("epochs");
    c.walk_len = j.at("walk_len");
    c.lr = j.at("lr");
    if (c.epochs < 0 || c.walk_len < 1 || !(c.lr >= 0.0)) throw Error(ErrorCode::ConfigInvalid, "invalid pretrain config");
    return c;
}

/// Every tunable value, grouped by config-file section.
struct RunConfig {
    nlohmann::json values = {{"model", cascadenet::to_json(ModelConfig{})},
                             {"train", cascadenet::to_json(TrainConfig{})},
                             {"pretrain", to_json(PretrainConfig{})},
                             {"synth", to_json(SynthConfig{})}};
    nlohmann::json sources = nlohmann::json::object();  // "section.key" -> "file" | "flag"
    std::string file;                                   // config file path, empty when none

    ModelConfig model() const { return model_config_from_json(values["model"]); }
    TrainConfig train() const { return train_config_from_json(values["train"]); }
    PretrainConfig pretrain() const { return pretrain_config_from_json(values["pretrain"], model().dim); }
    SynthConfig synth() const { return synth_config_from_json(values["synth"]); }

    /// Converts `text` to the type of the existing default.
    void set(const std::string& section, const std::string& key, const std::string& text, const char* source) {
        if (!values.contains(section) || !values[section].contains(key)) {
            throw Error(ErrorCode::UsageError, "unknown config key '" + section + "." + key + "'");
        }
        nlohmann::json& slot = values[section][key];
        try {
            if (slot.is_boolean()) {
                slot = parse_bool(text);
            } else if (slot.is_number_unsigned()) {
                if (text.find('-') != std::string::npos) throw std::invalid_argument("negative");
                slot = std::stoull(text);
            } else if (slot.is_number_integer()) {
                slot = std::stoll(text);
            } else if (slot.is_number_float()) {
                slot = std::stod(text);
            } else if (slot.is_array()) {
                nlohmann::json items = nlohmann::json::array();
                std::stringstream in(text);
                for (std::string item; std::getline(in, item, ',');) items.push_back(parse_bool(trim(item)));
                if (items.size() != slot.size()) throw std::invalid_argument("wrong length");
                slot = items;
            } else {
                slot = text;
            }
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::ValidationError, "bad value '" + text + "' for " + section + "." + key);
        }
        sources[section + "." + key] = source;
    }

    void load_file(const std::string& path) {
        boost::property_tree::ptree tree;
        file = path;
        try {
            boost::property_tree::ini_parser::read_ini(path, tree);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw Error(fs::exists(path) ? ErrorCode::ValidationError : ErrorCode::IoError, e.what());
        }
        for (const auto& [section, keys] : tree) {
            if (keys.empty()) throw Error(ErrorCode::ValidationError, "config key '" + section + "' outside a section");
            for (const auto& [key, value] : keys) set(section, key, value.data(), "file");
        }
    }

    /// Fails early with the first invalid section.
    void validate() const {
        model();
        train();
        pretrain();
        synth();
    }

private:
    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t");
        const auto b = s.find_last_not_of(" \t");
        return a == std::string::npos ? "" : s.substr(a, b - a + 1);
    }
    static bool parse_bool(const std::string& text) {
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        throw std::invalid_argument("not a boolean");
    }
};

/// Git blob hash: SHA-1 over "blob <size>\0" followed by the content.
inline std::string git_blob_hash(const std::string& content) {
    const std::string header = "blob " + std::to_string(content.size()) + '\0';
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) &&
                    EVP_DigestUpdate(ctx, header.data(), header.size()) &&
                    EVP_DigestUpdate(ctx, content.data(), content.size()) && EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    if (!ok) throw Error(ErrorCode::IoError, "sha1 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
}

inline nlohmann::json read_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ValidationError, path.string() + ": " + e.what());
    }
}

/// Collects inputs and outputs of one command and writes
/// `manifest_<command>.json` into the output directory.
class Manifest {
public:
    Manifest(std::string command, std::vector<std::string> argv)
        : command_(std::move(command)), argv_(std::move(argv)), started_(std::chrono::steady_clock::now()) {}

    void input(const fs::path& path) { inputs_[path.string()] = git_blob_hash(read_text(path)); }
    void output(const fs::path& path) { outputs_[path.string()] = git_blob_hash(read_text(path)); }

    void write(const fs::path& out_dir, const RunConfig& config, std::uint64_t seed) const {
        auto inputs = inputs_;
        if (!config.file.empty()) inputs[config.file] = git_blob_hash(read_text(config.file));
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
        const nlohmann::json doc = {{"command", command_},
                                    {"argv", argv_},
                                    {"seed", seed},
                                    {"config", config.values},
                                    {"config_sources", config.sources},
                                    {"inputs", inputs},
                                    {"outputs", outputs_},
                                    {"wall_seconds", seconds}};
        write_text(out_dir / ("manifest_" + command_ + ".json"), doc.dump(2) + "\n");
    }

private:
    std::string command_;
    std::vector<std::string> argv_;
    std::chrono::steady_clock::time_point started_;
    std::map<std::string, std::string> inputs_, outputs_;
};

}  // namespace cascadenet::cli
