#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <tuple>
#include <vector>

#include "set2seq/data/instance.hpp"
#include "set2seq/error.hpp"
#include "set2seq/numerics/rng.hpp"
#include "set2seq/parallel.hpp"

namespace set2seq {

struct RulesetConfig {
    int n_rel = 3;
    std::int64_t modulus = 97;
    std::int64_t key_max = 50;  // keys uniform in [1, key_max]
    int card_min = 10, card_max = 15;
    int distractor_dims = 1;
    std::size_t count = 1000;
    std::uint64_t seed = 0;

    int feature_dim() const { return 2 + distractor_dims; }

    void validate() const {
        require(n_rel >= 2, "ruleset: n_rel must be >= 2");
        require(card_min >= 1 && card_min <= card_max, "ruleset: need 1 <= card_min <= card_max");
        require(n_rel <= card_min, "ruleset: n_rel " + std::to_string(n_rel) + " > min cardinality " + std::to_string(card_min));
        require(modulus >= 2 && key_max >= 1 && distractor_dims >= 0, "ruleset: modulus >= 2, key_max >= 1, distractor_dims >= 0");
    }
};

/// Sum over (n_rel - 1)-subsets S of the other indices of
/// (key_i + sum_{j in S} key_j)^2 mod M.
inline std::int64_t ruleset_score(const std::vector<std::int64_t>& keys, std::size_t i, int n_rel, std::int64_t modulus) {
    const std::size_t n = keys.size();
    require(i < n, "ruleset_score: index out of range");
    require(n_rel >= 1 && static_cast<std::size_t>(n_rel) <= n,
            "ruleset_score: n_rel " + std::to_string(n_rel) + " > cardinality " + std::to_string(n));
    std::vector<std::int64_t> others;
    for (std::size_t j = 0; j < n; ++j)
        if (j != i) others.push_back(keys[j]);
    const std::size_t r = static_cast<std::size_t>(n_rel - 1);
    std::int64_t total = 0;
    std::function<void(std::size_t, std::size_t, std::int64_t)> rec = [&](std::size_t start, std::size_t left, std::int64_t acc) {
        if (left == 0) {
            const std::int64_t v = acc % modulus;
            total += (v * v) % modulus;
            return;
        }
        for (std::size_t j = start; j + left <= others.size(); ++j) rec(j + 1, left - 1, acc + others[j]);
    };
    rec(0, r, keys[i]);
    return total;
}

inline std::vector<std::int64_t> ruleset_scores(const std::vector<std::int64_t>& keys, int n_rel, std::int64_t modulus) {
    std::vector<std::int64_t> s(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) s[i] = ruleset_score(keys, i, n_rel, modulus);
    return s;
}

/// Indices sorted ascending by (score, key, index).
inline Permutation ruleset_order(const std::vector<std::int64_t>& keys, const std::vector<std::int64_t>& scores) {
    std::vector<std::size_t> idx(keys.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(scores[a], keys[a], a) < std::tie(scores[b], keys[b], b);
    });
    return Permutation(std::move(idx));
}

inline std::vector<std::int64_t> ruleset_keys(const Instance& inst) { return inst.meta.at("keys").get<std::vector<std::int64_t>>(); }

inline Instance make_ruleset_instance(const std::vector<std::int64_t>& keys, const RulesetConfig& cfg, SeededRng& rng) {
    Instance inst;
    inst.task = "ruleset";
    const auto n = static_cast<Eigen::Index>(keys.size());
    inst.elements = Matrix<double>::Zero(n, cfg.feature_dim());
    for (Eigen::Index i = 0; i < n; ++i) {
        inst.elements(i, 0) = static_cast<double>(keys[static_cast<std::size_t>(i)]) / static_cast<double>(cfg.key_max);
        inst.elements(i, 1) = 1.0;
        for (int d = 0; d < cfg.distractor_dims; ++d) inst.elements(i, 2 + d) = rng.uniform();
    }
    auto scores = ruleset_scores(keys, cfg.n_rel, cfg.modulus);
    inst.target = ruleset_order(keys, scores);
    inst.meta = {{"keys", keys}, {"scores", scores}, {"n_rel", cfg.n_rel}, {"modulus", cfg.modulus}};
    return inst;
}

/// True iff the elements along `perm` are non-decreasing in (score, key).
/// Equal keys always have equal scores, so such elements are interchangeable.
inline bool check_ruleset(const Instance& inst, const Permutation& perm) {
    const auto keys = ruleset_keys(inst);
    require(perm.size() == keys.size(), "check_ruleset: permutation size mismatch");
    const auto scores = ruleset_scores(keys, inst.meta.at("n_rel").get<int>(), inst.meta.at("modulus").get<std::int64_t>());
    for (std::size_t p = 1; p < perm.size(); ++p) {
        const auto a = perm[p - 1], b = perm[p];
        if (std::tie(scores[b], keys[b]) < std::tie(scores[a], keys[a])) return false;
    }
    return true;
}

inline Dataset gen_ruleset(const RulesetConfig& cfg) {
    cfg.validate();
    Dataset out(cfg.count);
    const SeededRng root(cfg.seed);
    parallel_for(cfg.count, [&](std::size_t i) {
        auto rng = root.derive(i);
        const auto n = rng.uniform_int(cfg.card_min, cfg.card_max);
        std::vector<std::int64_t> keys(static_cast<std::size_t>(n));
        for (auto& k : keys) k = rng.uniform_int(1, cfg.key_max);
        out[i] = make_ruleset_instance(keys, cfg, rng);
    });
    return out;
}

}  // namespace set2seq
