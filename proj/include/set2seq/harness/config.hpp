#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "set2seq/data/grammar.hpp"
#include "set2seq/data/ruleset.hpp"
#include "set2seq/data/tsp.hpp"
#include "set2seq/model/model.hpp"

namespace set2seq {

enum class Precision { single, dbl };

struct OptimConfig {
    double lr = 1e-4;
    double weight_decay = 1e-2;
    std::size_t batch_size = 32;
    std::size_t epochs = 50;
    double lambda = 0.1;
    double dropout = 0.1;
    double clip_norm = 5.0;
    int pair_cap = 32;
    bool paper_sign = false;
    bool bucketing = true;
};

struct DataConfig {
    std::string task = "grammar";  // tsp | grammar | ruleset | embedded
    std::string train_path;        // when set, loaded instead of generated
    std::string test_path;
    std::size_t train_count = 5000;
    std::size_t test_count = 500;
    double val_fraction = 0.1;
    int test_n_min = 0;  // 0: same cardinality range as training
    int test_n_max = 0;
    TspConfig tsp;
    GrammarConfig grammar;
    RulesetConfig ruleset;
};

struct RunConfig {
    std::string profile = "desk";
    std::uint64_t seed = 0;
    Precision precision = Precision::single;
    std::size_t eval_every = 1;
    std::size_t runs = 3;  // seeds per recipe cell
    ModelConfig model;
    OptimConfig optim;
    DataConfig data;

    RunConfig() {
        model.encoder.d_model = 256;
        model.encoder.n_heads = 4;
        model.encoder.n_sit_layers = 3;
    }

    // Encoder width is fixed by the data; dropout lives with the optimiser settings.
    ModelConfig model_for(Eigen::Index d_input) const {
        ModelConfig m = model;
        m.encoder.d_input = static_cast<int>(d_input);
        m.encoder.dropout = optim.dropout;
        return m;
    }

    LossConfig loss() const { return LossConfig{optim.lambda, optim.pair_cap, optim.paper_sign}; }
};

namespace detail {

inline std::string fmt_double(double x) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error(key + ": expected a boolean, got '" + v + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        T out;
        if constexpr (std::is_floating_point_v<T>) {
            out = static_cast<T>(std::stod(v, &used));
        } else if constexpr (std::is_signed_v<T>) {
            out = static_cast<T>(std::stoll(v, &used));
        } else {
            require(v.find('-') == std::string::npos, "negative");
            out = static_cast<T>(std::stoull(v, &used));
        }
        require(used == v.size(), "trailing characters");
        return out;
    } catch (...) {
        throw Error(key + ": cannot parse '" + v + "' as a number");
    }
}

}  // namespace detail

struct ConfigKey {
    std::string name;  // section.key
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

namespace detail {

template <class T, class Access>
ConfigKey bind_key(std::string name, Access access) {
    ConfigKey k;
    k.name = name;
    k.get = [access](const RunConfig& c) {
        const T& v = access(const_cast<RunConfig&>(c));
        if constexpr (std::is_same_v<T, bool>) return std::string(v ? "true" : "false");
        else if constexpr (std::is_same_v<T, std::string>) return v;
        else if constexpr (std::is_floating_point_v<T>) return fmt_double(v);
        else return std::to_string(v);
    };
    k.set = [access, name](RunConfig& c, const std::string& s) {
        T& v = access(c);
        if constexpr (std::is_same_v<T, bool>) v = parse_bool(name, s);
        else if constexpr (std::is_same_v<T, std::string>) v = s;
        else v = parse_number<T>(name, s);
    };
    return k;
}

}  // namespace detail

#define SET2SEQ_KEY(T, name, expr) detail::bind_key<T>(name, [](RunConfig& c) -> T& { return expr; })

/// Every configurable key, in file order.
inline const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> k{
            SET2SEQ_KEY(std::string, "run.profile", c.profile),
            SET2SEQ_KEY(std::uint64_t, "run.seed", c.seed),
            SET2SEQ_KEY(std::size_t, "run.eval_every", c.eval_every),
            SET2SEQ_KEY(std::size_t, "run.runs", c.runs),
            SET2SEQ_KEY(int, "model.d_model", c.model.encoder.d_model),
            SET2SEQ_KEY(int, "model.n_heads", c.model.encoder.n_heads),
            SET2SEQ_KEY(int, "model.n_sit_layers", c.model.encoder.n_sit_layers),
            SET2SEQ_KEY(bool, "model.residual", c.model.encoder.use_residual),
            SET2SEQ_KEY(bool, "model.layer_norm", c.model.encoder.use_layer_norm),
            SET2SEQ_KEY(bool, "model.basic_residual", c.model.encoder.basic_residual),
            SET2SEQ_KEY(bool, "model.augment_set", c.model.encoder.augment_set),
            SET2SEQ_KEY(int, "model.d_att", c.model.decoder.d_att),
            SET2SEQ_KEY(int, "model.pair_hidden", c.model.decoder.pair_hidden),
            SET2SEQ_KEY(bool, "model.symmetric_init", c.model.decoder.symmetric_init),
            SET2SEQ_KEY(double, "optim.lr", c.optim.lr),
            SET2SEQ_KEY(double, "optim.weight_decay", c.optim.weight_decay),
            SET2SEQ_KEY(std::size_t, "optim.batch_size", c.optim.batch_size),
            SET2SEQ_KEY(std::size_t, "optim.epochs", c.optim.epochs),
            SET2SEQ_KEY(double, "optim.lambda", c.optim.lambda),
            SET2SEQ_KEY(double, "optim.dropout", c.optim.dropout),
            SET2SEQ_KEY(double, "optim.clip_norm", c.optim.clip_norm),
            SET2SEQ_KEY(int, "optim.pair_cap", c.optim.pair_cap),
            SET2SEQ_KEY(bool, "optim.paper_sign", c.optim.paper_sign),
            SET2SEQ_KEY(bool, "optim.bucketing", c.optim.bucketing),
            SET2SEQ_KEY(std::string, "data.task", c.data.task),
            SET2SEQ_KEY(std::string, "data.train_path", c.data.train_path),
            SET2SEQ_KEY(std::string, "data.test_path", c.data.test_path),
            SET2SEQ_KEY(std::size_t, "data.train_count", c.data.train_count),
            SET2SEQ_KEY(std::size_t, "data.test_count", c.data.test_count),
            SET2SEQ_KEY(double, "data.val_fraction", c.data.val_fraction),
            SET2SEQ_KEY(int, "data.test_n_min", c.data.test_n_min),
            SET2SEQ_KEY(int, "data.test_n_max", c.data.test_n_max),
            SET2SEQ_KEY(int, "tsp.n_min", c.data.tsp.n_min),
            SET2SEQ_KEY(int, "tsp.n_max", c.data.tsp.n_max),
            SET2SEQ_KEY(bool, "tsp.closed", c.data.tsp.closed_tour),
            SET2SEQ_KEY(int, "grammar.n_min", c.data.grammar.n_min),
            SET2SEQ_KEY(int, "grammar.n_max", c.data.grammar.n_max),
            SET2SEQ_KEY(int, "grammar.k_min", c.data.grammar.k_min),
            SET2SEQ_KEY(int, "grammar.k_max", c.data.grammar.k_max),
            SET2SEQ_KEY(int, "ruleset.order", c.data.ruleset.n_rel),
            SET2SEQ_KEY(std::int64_t, "ruleset.modulus", c.data.ruleset.modulus),
            SET2SEQ_KEY(std::int64_t, "ruleset.key_max", c.data.ruleset.key_max),
            SET2SEQ_KEY(int, "ruleset.card_min", c.data.ruleset.card_min),
            SET2SEQ_KEY(int, "ruleset.card_max", c.data.ruleset.card_max),
            SET2SEQ_KEY(int, "ruleset.distractor_dims", c.data.ruleset.distractor_dims),
        };
        k.push_back({"run.precision", [](const RunConfig& c) { return std::string(c.precision == Precision::dbl ? "double" : "single"); },
                     [](RunConfig& c, const std::string& v) {
                         require(v == "single" || v == "double", "run.precision: expected single or double, got '" + v + "'");
                         c.precision = v == "double" ? Precision::dbl : Precision::single;
                     }});
        k.push_back({"model.sigma", [](const RunConfig& c) { return to_string(c.model.encoder.sigma); },
                     [](RunConfig& c, const std::string& v) { c.model.encoder.sigma = sigma_from_string(v); }});
        k.push_back({"grammar.kind", [](const RunConfig& c) { return to_string(c.data.grammar.kind); },
                     [](RunConfig& c, const std::string& v) { c.data.grammar.kind = grammar_kind_from_string(v); }});
        std::stable_sort(k.begin(), k.end(), [](const ConfigKey& a, const ConfigKey& b) {
            auto sec = [](const std::string& s) { return s.substr(0, s.find('.')); };
            static const std::vector<std::string> order{"run", "model", "optim", "data", "tsp", "grammar", "ruleset"};
            auto rank = [&](const std::string& s) { return std::find(order.begin(), order.end(), sec(s)) - order.begin(); };
            return rank(a.name) < rank(b.name);
        });
        return k;
    }();
    return keys;
}

#undef SET2SEQ_KEY

inline std::string valid_keys_list() {
    std::string s;
    for (const auto& k : config_keys()) s += (s.empty() ? "" : ", ") + k.name;
    return s;
}

inline const ConfigKey& find_key(const std::string& name) {
    for (const auto& k : config_keys())
        if (k.name == name) return k;
    throw Error("unknown config key '" + name + "'; valid keys: " + valid_keys_list());
}

inline void set_key(RunConfig& c, const std::string& name, const std::string& value) { find_key(name).set(c, value); }
inline std::string get_key(const RunConfig& c, const std::string& name) { return find_key(name).get(c); }

/// Profile presets layered on top of the paper defaults. Grammar ranges
/// depend on the grammar kind, so the kind is fixed first.
inline void apply_profile(RunConfig& c, const std::string& profile, GrammarKind kind = GrammarKind::anbncn) {
    c.profile = profile;
    c.data.grammar = GrammarConfig::defaults(kind);
    if (profile == "paper") {
        c.model.encoder.d_model = 256;
        c.model.encoder.n_heads = 4;
        c.model.encoder.n_sit_layers = 3;
        c.optim.epochs = 50;
        return;
    }
    require(profile == "desk", "run.profile: expected desk or paper, got '" + profile + "'");
    c.model.encoder.d_model = 64;
    c.model.encoder.n_heads = 2;
    c.model.encoder.n_sit_layers = 2;
    c.optim.epochs = 20;
    c.optim.lr = 1e-3;
    c.data.grammar.n_max = kind == GrammarKind::anbkcnk ? 4 : 8;
    c.data.grammar.k_max = 4;
    c.data.tsp.n_max = 7;
}

/// Flattened key/value pairs from an INI text (top-level keys and [section] keys).
inline std::vector<std::pair<std::string, std::string>> parse_ini(const std::string& text, const std::string& name = "<config>") {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream is(text);
    try {
        pt::ini_parser::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(name + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [sec, node] : tree) {
        if (node.empty()) {
            out.emplace_back(sec, node.data());
            continue;
        }
        for (const auto& [key, leaf] : node) out.emplace_back(sec + "." + key, leaf.data());
    }
    return out;
}

inline std::pair<std::string, std::string> parse_override(const std::string& kv) {
    const auto eq = kv.find('=');
    require(eq != std::string::npos && eq > 0, "override '" + kv + "' is not key=value");
    return {kv.substr(0, eq), kv.substr(eq + 1)};
}

/// Resolution order: paper defaults, profile preset, config file, overrides.
inline RunConfig resolve_config(const std::string& ini_text, const std::vector<std::string>& overrides, const std::string& name = "<config>") {
    auto file = parse_ini(ini_text, name);
    std::vector<std::pair<std::string, std::string>> ov;
    for (const auto& o : overrides) ov.push_back(parse_override(o));
    for (const auto& [k, v] : file) find_key(k);
    for (const auto& [k, v] : ov) find_key(k);

    auto last_value = [&](const std::string& key, std::string fallback) {
        for (const auto& [k, v] : file)
            if (k == key) fallback = v;
        for (const auto& [k, v] : ov)
            if (k == key) fallback = v;
        return fallback;
    };

    RunConfig c;
    apply_profile(c, last_value("run.profile", "desk"), grammar_kind_from_string(last_value("grammar.kind", "anbncn")));
    for (const auto& [k, v] : file) set_key(c, k, v);
    for (const auto& [k, v] : ov) set_key(c, k, v);
    return c;
}

inline void validate_config(const RunConfig& c) {
    c.model_for(1).encoder.validate();
    require(c.optim.batch_size >= 1 && c.optim.epochs >= 1, "optim.batch_size and optim.epochs must be >= 1");
    require(c.optim.lr > 0 && c.optim.clip_norm > 0, "optim.lr and optim.clip_norm must be > 0");
    require(c.data.val_fraction >= 0 && c.data.val_fraction < 1, "data.val_fraction must be in [0, 1)");
    require(c.eval_every >= 1 && c.runs >= 1, "run.eval_every and run.runs must be >= 1");
    const auto& t = c.data.task;
    require(t == "tsp" || t == "grammar" || t == "ruleset" || t == "embedded",
            "data.task: expected tsp, grammar, ruleset or embedded, got '" + t + "'");
    require(t != "embedded" || !c.data.train_path.empty(), "data.task=embedded needs data.train_path");
}

/// Canonical INI text of the fully resolved config.
inline std::string to_ini(const RunConfig& c) {
    std::string out, section;
    for (const auto& k : config_keys()) {
        const auto dot = k.name.find('.');
        const auto sec = k.name.substr(0, dot);
        if (sec != section) {
            out += (section.empty() ? "" : "\n") + ("[" + sec + "]\n");
            section = sec;
        }
        out += k.name.substr(dot + 1) + " = " + k.get(c) + "\n";
    }
    return out;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string config_hash(const RunConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_ini(c))));
    return buf;
}

}  // namespace set2seq
