#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "set2seq/harness/config.hpp"
#include "set2seq/numerics/adamw.hpp"

namespace set2seq {

inline constexpr char kCheckpointMagic[8] = {'S', '2', 'S', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to resume training bit-identically.
template <class T>
struct TrainState {
    RunConfig config;
    Eigen::Index d_input = 0;
    Model<T> model;
    AdamwState<T> opt;
    std::size_t epoch = 0;  // completed epochs
    SeededRng rng;
    double best_score = -std::numeric_limits<double>::infinity();
    double best_loss = std::numeric_limits<double>::infinity();  // validation loss at best_epoch, breaks score ties
    std::size_t best_epoch = 0;
    std::vector<nlohmann::json> log;

    static TrainState fresh(const RunConfig& cfg, Eigen::Index d_input) {
        TrainState s;
        s.config = cfg;
        s.d_input = d_input;
        s.model = Model<T>(cfg.model_for(d_input), SeededRng(cfg.seed).derive(5).seed());
        s.opt = AdamwState<T>::for_store(s.model.store());
        s.rng = SeededRng(cfg.seed).derive(4);
        return s;
    }
};

template <class T>
constexpr const char* precision_name() {
    return std::is_same_v<T, double> ? "double" : "single";
}

struct CheckpointHeader {
    nlohmann::json meta;
    std::streamoff blob_offset = 0;
};

inline CheckpointHeader read_checkpoint_header(std::istream& is, const std::string& path) {
    char magic[8];
    is.read(magic, 8);
    require(is && std::memcmp(magic, kCheckpointMagic, 8) == 0, path + ": not a set2seq checkpoint");
    std::uint32_t version = 0;
    std::uint64_t len = 0;
    is.read(reinterpret_cast<char*>(&version), sizeof version);
    require(is && version == kCheckpointVersion,
            path + ": checkpoint version " + std::to_string(version) + " unsupported (expected " + std::to_string(kCheckpointVersion) + ")");
    is.read(reinterpret_cast<char*>(&len), sizeof len);
    std::string text(len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(len));
    require(static_cast<bool>(is), path + ": truncated header");
    CheckpointHeader h;
    h.meta = nlohmann::json::parse(text);
    h.blob_offset = is.tellg();
    return h;
}

inline CheckpointHeader read_checkpoint_header(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), "cannot open checkpoint '" + path + "'");
    return read_checkpoint_header(is, path);
}

template <class T>
void save_checkpoint(const TrainState<T>& s, const std::string& path) {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : s.model.store()) params.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
    nlohmann::json meta = {{"precision", precision_name<T>()},
                           {"config", to_ini(s.config)},
                           {"config_hash", config_hash(s.config)},
                           {"d_input", s.d_input},
                           {"epoch", s.epoch},
                           {"rng", s.rng.serialize()},
                           {"adam_step", s.opt.step},
                           {"best_score", s.best_score},
                           {"best_loss", s.best_loss},
                           {"best_epoch", s.best_epoch},
                           {"log", s.log},
                           {"params", params}};
    const std::string text = meta.dump();
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        require(static_cast<bool>(os), "cannot write checkpoint '" + path + "'");
        os.write(kCheckpointMagic, 8);
        const std::uint32_t version = kCheckpointVersion;
        const std::uint64_t len = text.size();
        os.write(reinterpret_cast<const char*>(&version), sizeof version);
        os.write(reinterpret_cast<const char*>(&len), sizeof len);
        os.write(text.data(), static_cast<std::streamsize>(len));
        auto blob = [&](const Matrix<T>& m) {
            os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(T) * static_cast<std::size_t>(m.size())));
        };
        for (std::size_t i = 0; i < s.model.store().size(); ++i) {
            blob(s.model.store()[i].value);
            blob(s.opt.m[i]);
            blob(s.opt.v[i]);
        }
        require(static_cast<bool>(os), "write failed for checkpoint '" + path + "'");
    }
    std::rename(tmp.c_str(), path.c_str());
}

template <class T>
TrainState<T> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), "cannot open checkpoint '" + path + "'");
    auto h = read_checkpoint_header(is, path);
    const auto& meta = h.meta;
    require(meta.at("precision") == precision_name<T>(),
            path + ": checkpoint precision is " + meta.at("precision").get<std::string>() + ", requested " + precision_name<T>());
    const RunConfig cfg = resolve_config(meta.at("config").get<std::string>(), {}, path);
    auto s = TrainState<T>::fresh(cfg, meta.at("d_input").get<Eigen::Index>());
    s.epoch = meta.at("epoch").get<std::size_t>();
    s.rng = SeededRng::deserialize(meta.at("rng").get<std::string>());
    s.opt.step = meta.at("adam_step").get<std::uint64_t>();
    s.best_score = meta.at("best_score").is_null() ? -std::numeric_limits<double>::infinity() : meta.at("best_score").get<double>();
    s.best_loss = meta.at("best_loss").is_null() ? std::numeric_limits<double>::infinity() : meta.at("best_loss").get<double>();
    s.best_epoch = meta.at("best_epoch").get<std::size_t>();
    s.log = meta.at("log").get<std::vector<nlohmann::json>>();
    const auto& params = meta.at("params");
    auto& store = s.model.store();
    require(params.size() == store.size(), path + ": parameter count " + std::to_string(params.size()) + " does not match the model (" +
                                               std::to_string(store.size()) + ")");
    auto blob = [&](Matrix<T>& m) {
        is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(T) * static_cast<std::size_t>(m.size())));
        require(static_cast<bool>(is), path + ": truncated parameter data");
    };
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& p = params[i];
        auto& mine = store[i];
        require(p.at("name") == mine.name && p.at("rows").get<Eigen::Index>() == mine.value.rows() &&
                    p.at("cols").get<Eigen::Index>() == mine.value.cols(),
                path + ": parameter " + p.at("name").get<std::string>() + " does not match the configured model");
        blob(mine.value);
        blob(s.opt.m[i]);
        blob(s.opt.v[i]);
    }
    return s;
}

}  // namespace set2seq
