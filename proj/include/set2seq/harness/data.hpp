#pragma once

#include <cmath>
#include <string>

#include "set2seq/data/dataset.hpp"
#include "set2seq/harness/config.hpp"

namespace set2seq {

struct Splits {
    Dataset train, val, test;
};

namespace detail {

inline Dataset generate(const RunConfig& c, std::size_t count, std::uint64_t seed, bool test) {
    const auto& d = c.data;
    auto range = [&](int lo, int hi) {
        if (test && d.test_n_min > 0) lo = d.test_n_min;
        if (test && d.test_n_max > 0) hi = d.test_n_max;
        return std::pair{lo, hi};
    };
    if (d.task == "tsp") {
        TspConfig t = d.tsp;
        std::tie(t.n_min, t.n_max) = range(t.n_min, t.n_max);
        t.count = count;
        t.seed = seed;
        t.with_targets = t.n_max <= static_cast<int>(kTspTargetMaxN);
        require(test || t.with_targets, "tsp.n_max > " + std::to_string(kTspTargetMaxN) + " has no training targets");
        return gen_tsp(t);
    }
    if (d.task == "grammar") {
        GrammarConfig g = d.grammar;
        std::tie(g.n_min, g.n_max) = range(g.n_min, g.n_max);
        g.count = count;
        g.seed = seed;
        return gen_grammar(g);
    }
    if (d.task == "ruleset") {
        RulesetConfig r = d.ruleset;
        std::tie(r.card_min, r.card_max) = range(r.card_min, r.card_max);
        r.count = count;
        r.seed = seed;
        return gen_ruleset(r);
    }
    throw Error("data.task=" + d.task + " cannot be generated; set data.train_path");
}

}  // namespace detail

/// Generator seeds for the training pool and the test set.
inline std::uint64_t train_data_seed(const RunConfig& c) { return SeededRng(c.seed).derive(1).seed(); }
inline std::uint64_t test_data_seed(const RunConfig& c) { return SeededRng(c.seed).derive(2).seed(); }

inline Dataset generate_train_pool(const RunConfig& c) { return detail::generate(c, c.data.train_count, train_data_seed(c), false); }
inline Dataset generate_test_set(const RunConfig& c) { return detail::generate(c, c.data.test_count, test_data_seed(c), true); }

/// Training pool split into train/validation by a seed-derived shuffle.
inline std::pair<Dataset, Dataset> split_validation(Dataset pool, double fraction, std::uint64_t seed) {
    auto order = SeededRng(seed).derive(3).permutation(pool.size());
    const auto n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(pool.size())));
    Dataset train, val;
    for (std::size_t i = 0; i < order.size(); ++i) (i < n_val ? val : train).push_back(std::move(pool[order[i]]));
    return {std::move(train), std::move(val)};
}

inline Splits load_splits(const RunConfig& c) {
    Splits s;
    Dataset pool;
    if (!c.data.train_path.empty()) {
        pool = c.data.task == "embedded" ? load_embedded(c.data.train_path) : load_dataset(c.data.train_path);
    } else {
        pool = generate_train_pool(c);
    }
    for (const auto& inst : pool) require(inst.target.has_value(), "training data needs targets");
    std::tie(s.train, s.val) = split_validation(std::move(pool), c.data.val_fraction, c.seed);
    if (!c.data.test_path.empty()) {
        s.test = c.data.task == "embedded" ? load_embedded(c.data.test_path) : load_dataset(c.data.test_path);
    } else if (c.data.task != "embedded" && c.data.test_count > 0) {
        s.test = generate_test_set(c);
    }
    require(!s.train.empty(), "training split is empty");
    return s;
}

}  // namespace set2seq
