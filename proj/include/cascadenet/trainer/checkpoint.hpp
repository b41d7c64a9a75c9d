#pragma once

// Versioned binary checkpoints.
//
// Layout (little-endian host order):
//   magic "CSCDCKPT" | u32 version | u64 n + n bytes of JSON metadata |
//   u64 tensor count | per tensor: u32 n + name, u64 rows, u64 cols,
//   rows*cols doubles (column-major) | u64 FNV-1a of every preceding byte.

#include "cascadenet/trainer/trainer.hpp"

#include <cstring>

namespace cascadenet {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'C', 'S', 'C', 'D', 'C', 'K', 'P', 'T'};

struct CheckpointData {
    nlohmann::json meta;
    std::vector<std::pair<std::string, Matrix>> tensors;
};

namespace checkpoint_detail {

template <class T>
void put(std::string& buf, const T& v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <class T>
    T get() {
        T v;
        std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
        return v;
    }

    std::string_view take(std::size_t n) {
        if (n > bytes_.size() - pos_) throw Error(ErrorCode::CorruptCheckpoint, "truncated checkpoint");
        auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    std::size_t position() const { return pos_; }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace checkpoint_detail

inline std::string encode_checkpoint(const CheckpointData& data) {
    using checkpoint_detail::put;
    std::string buf(kCheckpointMagic, sizeof(kCheckpointMagic));
    put(buf, kCheckpointVersion);
    const std::string meta = data.meta.dump();
    put(buf, static_cast<std::uint64_t>(meta.size()));
    buf += meta;
    put(buf, static_cast<std::uint64_t>(data.tensors.size()));
    for (const auto& [name, m] : data.tensors) {
        put(buf, static_cast<std::uint32_t>(name.size()));
        buf += name;
        put(buf, static_cast<std::uint64_t>(m.rows()));
        put(buf, static_cast<std::uint64_t>(m.cols()));
        buf.append(reinterpret_cast<const char*>(m.data()), sizeof(double) * static_cast<std::size_t>(m.size()));
    }
    put(buf, fnv1a64(buf));
    return buf;
}

inline CheckpointData decode_checkpoint(std::string_view bytes) {
    checkpoint_detail::Reader in(bytes);
    if (in.take(sizeof(kCheckpointMagic)) != std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic))) {
        throw Error(ErrorCode::CorruptCheckpoint, "bad magic");
    }
    const auto version = in.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw Error(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                                    std::to_string(kCheckpointVersion));
    }
    if (bytes.size() < sizeof(std::uint64_t) + in.position()) throw Error(ErrorCode::CorruptCheckpoint, "truncated checkpoint");
    const std::size_t body = bytes.size() - sizeof(std::uint64_t);
    std::uint64_t stored;
    std::memcpy(&stored, bytes.data() + body, sizeof(stored));
    if (stored != fnv1a64(bytes.substr(0, body))) throw Error(ErrorCode::CorruptCheckpoint, "checksum mismatch");

    checkpoint_detail::Reader payload(bytes.substr(0, body));
    payload.take(sizeof(kCheckpointMagic) + sizeof(std::uint32_t));
    CheckpointData data;
    const auto meta_len = payload.get<std::uint64_t>();
    try {
        data.meta = nlohmann::json::parse(payload.take(static_cast<std::size_t>(meta_len)));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptCheckpoint, std::string("metadata: ") + e.what());
    }
    const auto count = payload.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = payload.get<std::uint32_t>();
        std::string name(payload.take(name_len));
        const auto rows = payload.get<std::uint64_t>();
        const auto cols = payload.get<std::uint64_t>();
        if (cols != 0 && rows > (body / sizeof(double)) / cols) throw Error(ErrorCode::CorruptCheckpoint, "tensor too large");
        Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        const auto raw = payload.take(sizeof(double) * static_cast<std::size_t>(rows * cols));
        if (!raw.empty()) std::memcpy(m.data(), raw.data(), raw.size());
        data.tensors.emplace_back(std::move(name), std::move(m));
    }
    if (payload.position() != body) throw Error(ErrorCode::CorruptCheckpoint, "trailing bytes");
    return data;
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path + "'");
}

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

template <ParameterSet P>
void append_tensors(CheckpointData& data, const std::string& prefix, const P& params) {
    for (const auto& t : tensors(params)) data.tensors.emplace_back(prefix + t.name, *t.value);
}

/// Fills `params` (already shaped) from tensors stored under `prefix`.
template <ParameterSet P>
void restore_tensors(const CheckpointData& data, const std::string& prefix, P& params) {
    std::map<std::string_view, const Matrix*> by_name;
    for (const auto& [name, m] : data.tensors) by_name.emplace(name, &m);
    for (auto& t : tensors(params)) {
        auto it = by_name.find(prefix + t.name);
        if (it == by_name.end()) throw Error(ErrorCode::CorruptCheckpoint, "missing tensor '" + prefix + t.name + "'");
        const Matrix& stored = *it->second;
        if (stored.rows() != t.value->rows() || stored.cols() != t.value->cols()) {
            throw Error(ErrorCode::CorruptCheckpoint, "shape mismatch for '" + prefix + t.name + "'");
        }
        *t.value = stored;
    }
}

struct ModelCheckpoint {
    ModelParams params;
    ModelConfig config;
    nlohmann::json extra;  // free-form run metadata stored verbatim
};

inline void save_checkpoint(const std::string& path, const ModelParams& params, const ModelConfig& config,
                            const nlohmann::json& extra = nlohmann::json::object()) {
    CheckpointData data;
    data.meta = {{"kind", "model"}, {"model_config", to_json(config)}, {"extra", extra}};
    append_tensors(data, "params.", params);
    write_file_bytes(path, encode_checkpoint(data));
}

inline ModelCheckpoint model_from_checkpoint(const CheckpointData& data, const std::string& prefix = "params.") {
    ModelCheckpoint out;
    try {
        out.config = model_config_from_json(data.meta.at("model_config"));
        out.extra = data.meta.value("extra", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptCheckpoint, std::string("metadata: ") + e.what());
    }
    out.params = ModelParams::init(out.config, 0);
    restore_tensors(data, prefix, out.params);
    return out;
}

inline ModelCheckpoint load_checkpoint(const std::string& path) {
    return model_from_checkpoint(decode_checkpoint(read_file_bytes(path)));
}

/// Full trainer snapshot: parameters, optimiser moments, rng, GradNorm
/// state, epoch position, log and retained candidate epochs.
inline void save_trainer_checkpoint(const std::string& path, const Trainer& trainer) {
    const TrainerState& s = trainer.state();
    CheckpointData data;
    nlohmann::json log = nlohmann::json::array();
    for (const auto& r : s.log) log.push_back(to_json(r));
    nlohmann::json candidates = nlohmann::json::array();
    for (const auto& c : s.candidates) candidates.push_back(c.first);
    nlohmann::json scores = nlohmann::json::array();
    for (const auto& row : s.selection_scores) {
        nlohmann::json r = nlohmann::json::array();
        for (double v : row) r.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
        scores.push_back(r);
    }
    data.meta = {{"kind", "trainer"},
                 {"model_config", to_json(trainer.model_config())},
                 {"train_config", to_json(trainer.config())},
                 {"rng", rng_state(s.rng)},
                 {"adam_t", s.adam.t},
                 {"gradnorm",
                  {{"weights", s.gradnorm.weights},
                   {"initial_losses", s.gradnorm.initial_losses},
                   {"initialized", s.gradnorm.initialized}}},
                 {"epoch", s.epoch},
                 {"cursor", s.cursor},
                 {"order", s.order},
                 {"steps", s.steps},
                 {"epoch_loss_sum", s.epoch_loss_sum},
                 {"epoch_batches", s.epoch_batches},
                 {"epoch_seconds", s.epoch_seconds},
                 {"log", log},
                 {"selection_scores", scores},
                 {"candidates", candidates}};
    append_tensors(data, "params.", s.params);
    append_tensors(data, "adam.m.", s.adam.m);
    append_tensors(data, "adam.v.", s.adam.v);
    for (const auto& [epoch, params] : s.candidates) append_tensors(data, "epoch" + std::to_string(epoch) + ".", params);
    write_file_bytes(path, encode_checkpoint(data));
}

inline std::optional<MetricsReport> report_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    MetricsReport r;
    r.rumor = {j["rumor"]["accuracy"], j["rumor"]["precision"], j["rumor"]["recall"], j["rumor"]["macF1"]};
    r.virality = {j["virality"]["mse"], j["virality"]["msle"], j["virality"]["ndcg"]};
    if (!j["vulnerability"].is_null()) {
        r.vulnerability = RankedRegression{j["vulnerability"]["mse"], j["vulnerability"]["msle"], j["vulnerability"]["ndcg"]};
    }
    r.meta = {j["meta"]["split"], j["meta"]["obs_fraction"], j["meta"]["event_count"], j["meta"]["labeled_user_count"],
              j["meta"]["seed"]};
    return r;
}

/// Restores a trainer snapshot into `trainer`, whose configs must match the
/// stored ones.
inline void load_trainer_checkpoint(const std::string& path, Trainer& trainer) {
    const CheckpointData data = decode_checkpoint(read_file_bytes(path));
    const auto& m = data.meta;
    try {
        if (m.at("kind") != "trainer") throw Error(ErrorCode::CorruptCheckpoint, "not a trainer checkpoint");
        if (m.at("model_config") != to_json(trainer.model_config()) || m.at("train_config") != to_json(trainer.config())) {
            throw Error(ErrorCode::ConfigInvalid, "checkpoint was written with a different configuration");
        }
        TrainerState& s = trainer.mutable_state();
        restore_tensors(data, "params.", s.params);
        restore_tensors(data, "adam.m.", s.adam.m);
        restore_tensors(data, "adam.v.", s.adam.v);
        s.adam.t = m.at("adam_t");
        restore_rng(s.rng, m.at("rng").get<std::string>());
        s.gradnorm.weights = m.at("gradnorm").at("weights");
        s.gradnorm.initial_losses = m.at("gradnorm").at("initial_losses");
        s.gradnorm.initialized = m.at("gradnorm").at("initialized");
        s.epoch = m.at("epoch");
        s.cursor = m.at("cursor");
        s.order = m.at("order").get<std::vector<std::size_t>>();
        s.steps = m.at("steps");
        s.epoch_loss_sum = m.at("epoch_loss_sum");
        s.epoch_batches = m.at("epoch_batches");
        s.epoch_seconds = m.at("epoch_seconds");
        s.log.clear();
        for (const auto& r : m.at("log")) {
            EpochRecord rec;
            rec.epoch = r.at("epoch");
            rec.train_losses = {r["train_losses"]["rumor"], r["train_losses"]["virality"], r["train_losses"]["vulnerability"]};
            rec.weights = r.at("weights");
            rec.validation = report_from_json(r.at("validation"));
            rec.wall_seconds = r.at("wall_seconds");
            s.log.push_back(std::move(rec));
        }
        s.selection_scores.clear();
        for (const auto& row : m.at("selection_scores")) {
            std::vector<double> r;
            for (const auto& v : row) r.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
            s.selection_scores.push_back(std::move(r));
        }
        s.candidates.clear();
        for (const auto& e : m.at("candidates")) {
            const int epoch = e.get<int>();
            ModelParams p = s.params;
            restore_tensors(data, "epoch" + std::to_string(epoch) + ".", p);
            s.candidates.emplace_back(epoch, std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptCheckpoint, std::string("metadata: ") + e.what());
    }
}

}  // namespace cascadenet
