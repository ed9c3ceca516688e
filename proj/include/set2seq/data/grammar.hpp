#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "set2seq/data/instance.hpp"
#include "set2seq/error.hpp"
#include "set2seq/numerics/rng.hpp"
#include "set2seq/parallel.hpp"

namespace set2seq {

enum class GrammarKind { anbncn, anbkcnk, dyck };

inline std::string to_string(GrammarKind k) {
    switch (k) {
        case GrammarKind::anbncn: return "anbncn";
        case GrammarKind::anbkcnk: return "anbkcnk";
        case GrammarKind::dyck: return "dyck";
    }
    return "?";
}

inline GrammarKind grammar_kind_from_string(const std::string& s) {
    if (s == "anbncn") return GrammarKind::anbncn;
    if (s == "anbkcnk") return GrammarKind::anbkcnk;
    if (s == "dyck") return GrammarKind::dyck;
    throw Error("unknown grammar kind '" + s + "' (valid: anbncn, anbkcnk, dyck)");
}

inline std::string grammar_alphabet(GrammarKind k) { return k == GrammarKind::dyck ? "(){}" : "abc"; }

struct GrammarConfig {
    GrammarKind kind = GrammarKind::anbncn;
    // anbncn: n; anbkcnk: n and k; dyck: n bracket pairs
    int n_min = 1, n_max = 100;
    int k_min = 1, k_max = 25;
    std::size_t count = 1000;
    std::uint64_t seed = 0;

    static GrammarConfig defaults(GrammarKind kind) {
        GrammarConfig c;
        c.kind = kind;
        if (kind == GrammarKind::anbkcnk) c.n_max = 25;
        if (kind == GrammarKind::dyck) c.n_min = 2;
        return c;
    }

    void validate() const {
        require(n_min >= 1 && n_min <= n_max, "grammar: need 1 <= n_min <= n_max");
        require(kind != GrammarKind::anbkcnk || (k_min >= 1 && k_min <= k_max), "grammar: need 1 <= k_min <= k_max");
    }
};

inline bool check_grammar(GrammarKind kind, const std::string& symbols) {
    const std::string alpha = grammar_alphabet(kind);
    for (char c : symbols) {
        require(alpha.find(c) != std::string::npos, std::string("check_grammar: unknown symbol '") + c + "' for " + to_string(kind));
    }
    if (kind == GrammarKind::dyck) {
        std::vector<char> stack;
        for (char c : symbols) {
            if (c == '(' || c == '{') {
                stack.push_back(c);
            } else {
                const char open = c == ')' ? '(' : '{';
                if (stack.empty() || stack.back() != open) return false;
                stack.pop_back();
            }
        }
        return stack.empty();
    }
    // a+ b+ c+
    std::size_t i = 0, na = 0, nb = 0, nc = 0;
    while (i < symbols.size() && symbols[i] == 'a') ++i, ++na;
    while (i < symbols.size() && symbols[i] == 'b') ++i, ++nb;
    while (i < symbols.size() && symbols[i] == 'c') ++i, ++nc;
    if (i != symbols.size() || !na || !nb || !nc) return false;
    return kind == GrammarKind::anbncn ? (na == nb && nb == nc) : nc == na * nb;
}

/// Uniform Dyck word with n pairs over one bracket type (cycle lemma): a
/// random arrangement of n up-steps and n+1 down-steps has exactly one
/// rotation whose proper prefixes stay non-negative.
inline std::string sample_dyck_shape(int n, SeededRng& rng) {
    std::vector<int> steps(static_cast<std::size_t>(2 * n + 1), -1);
    std::fill(steps.begin(), steps.begin() + n, 1);
    rng.shuffle(steps.begin(), steps.end());
    int sum = 0, min_sum = 0;
    std::size_t min_at = 0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        sum += steps[i];
        if (sum < min_sum) {
            min_sum = sum;
            min_at = i;
        }
    }
    std::rotate(steps.begin(), steps.begin() + static_cast<std::ptrdiff_t>(min_at + 1), steps.end());
    std::string s;
    for (std::size_t i = 0; i + 1 < steps.size(); ++i) s += steps[i] > 0 ? '(' : ')';
    return s;
}

/// Dyck word over ( ) and { }: uniform shape, bracket kind uniform per pair.
inline std::string sample_dyck(int n, SeededRng& rng) {
    std::string s = sample_dyck_shape(n, rng);
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '(') {
            open.push_back(i);
        } else {
            const std::size_t j = open.back();
            open.pop_back();
            if (rng.bernoulli(0.5)) {
                s[j] = '{';
                s[i] = '}';
            }
        }
    }
    return s;
}

/// Reassigns interchangeable elements (same class) inside `p` so that, within
/// each class, they appear in ascending `key` order. The class sequence along
/// the output is unchanged.
inline Permutation canonicalize_duplicates(const Permutation& p, const std::vector<int>& cls, const std::vector<double>& key) {
    require(cls.size() == p.size() && key.size() == p.size(), "canonicalize_duplicates: size mismatch");
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < cls.size(); ++i) members[cls[i]].push_back(i);
    for (auto& [c, v] : members) {
        std::stable_sort(v.begin(), v.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
    }
    std::map<int, std::size_t> used;
    std::vector<std::size_t> out(p.size());
    for (std::size_t pos = 0; pos < p.size(); ++pos) {
        const int c = cls[p[pos]];
        out[pos] = members[c][used[c]++];
    }
    return Permutation(std::move(out));
}

// Symbol per element in input order, read from the instance meta.
inline std::string grammar_symbols(const Instance& inst) { return inst.meta.at("symbols").get<std::string>(); }

inline GrammarKind grammar_kind_of(const Instance& inst) { return grammar_kind_from_string(inst.meta.at("kind").get<std::string>()); }

inline std::string ordered_symbols(const Instance& inst, const Permutation& p) {
    const std::string sym = grammar_symbols(inst);
    std::string out;
    for (auto i : p) out += sym[i];
    return out;
}

/// Canonical form of a prediction for a grammar instance: duplicates ordered
/// by their tiebreak feature (the last element column).
inline Permutation canonical_grammar_order(const Instance& inst, const Permutation& p) {
    const std::string sym = grammar_symbols(inst);
    std::vector<int> cls(sym.begin(), sym.end());
    std::vector<double> key(inst.size());
    for (std::size_t i = 0; i < key.size(); ++i) key[i] = inst.elements(static_cast<Eigen::Index>(i), inst.dim() - 1);
    return canonicalize_duplicates(p, cls, key);
}

/// Builds an instance from a canonical string: tokens are shuffled, each gets
/// a one-hot symbol code plus a uniform tiebreak value, and the target
/// restores the string with duplicates in tiebreak order.
inline Instance make_grammar_instance(GrammarKind kind, const std::string& canonical, SeededRng& rng, Json params = Json::object()) {
    const std::string alpha = grammar_alphabet(kind);
    const std::size_t n = canonical.size();
    auto order = rng.permutation(n);  // input slot i holds canonical token order[i]
    Instance inst;
    inst.task = "grammar:" + to_string(kind);
    inst.elements = Matrix<double>::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(alpha.size() + 1));
    std::string symbols(n, ' ');
    for (std::size_t i = 0; i < n; ++i) {
        const char c = canonical[order[i]];
        symbols[i] = c;
        inst.elements(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(alpha.find(c))) = 1.0;
        inst.elements(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(alpha.size())) = rng.uniform();
    }
    std::vector<std::size_t> inv(n);
    for (std::size_t i = 0; i < n; ++i) inv[order[i]] = i;
    params["kind"] = to_string(kind);
    params["symbols"] = symbols;
    inst.meta = std::move(params);
    inst.target = canonical_grammar_order(inst, Permutation(std::move(inv)));
    return inst;
}

inline Dataset gen_grammar(const GrammarConfig& cfg) {
    cfg.validate();
    Dataset out(cfg.count);
    const SeededRng root(cfg.seed);
    parallel_for(cfg.count, [&](std::size_t i) {
        auto rng = root.derive(i);
        const int n = static_cast<int>(rng.uniform_int(cfg.n_min, cfg.n_max));
        std::string s;
        Json params = {{"n", n}};
        switch (cfg.kind) {
            case GrammarKind::anbncn:
                s = std::string(static_cast<std::size_t>(n), 'a') + std::string(static_cast<std::size_t>(n), 'b') +
                    std::string(static_cast<std::size_t>(n), 'c');
                break;
            case GrammarKind::anbkcnk: {
                const int k = static_cast<int>(rng.uniform_int(cfg.k_min, cfg.k_max));
                params["k"] = k;
                s = std::string(static_cast<std::size_t>(n), 'a') + std::string(static_cast<std::size_t>(k), 'b') +
                    std::string(static_cast<std::size_t>(n * k), 'c');
                break;
            }
            case GrammarKind::dyck: s = sample_dyck(n, rng); break;
        }
        out[i] = make_grammar_instance(cfg.kind, s, rng, std::move(params));
    });
    return out;
}

}  // namespace set2seq
