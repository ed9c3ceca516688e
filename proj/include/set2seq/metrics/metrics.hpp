#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "set2seq/data/grammar.hpp"
#include "set2seq/data/ruleset.hpp"
#include "set2seq/data/tsp.hpp"
#include "set2seq/error.hpp"

namespace set2seq {

namespace detail {

inline std::uint64_t count_inversions(std::vector<std::size_t>& a, std::vector<std::size_t>& buf, std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t inv = count_inversions(a, buf, lo, mid) + count_inversions(a, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (a[i] <= a[j]) {
            buf[k++] = a[i++];
        } else {
            inv += mid - i;
            buf[k++] = a[j++];
        }
    }
    while (i < mid) buf[k++] = a[i++];
    while (j < hi) buf[k++] = a[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
              a.begin() + static_cast<std::ptrdiff_t>(lo));
    return inv;
}

}  // namespace detail

/// Number of element pairs ordered differently by the two permutations.
inline std::uint64_t discordant_pairs(const Permutation& pred, const Permutation& truth) {
    require(pred.size() == truth.size(), "kendall_tau: length mismatch");
    const auto rank = truth.positions();
    std::vector<std::size_t> seq(pred.size()), buf(pred.size());
    for (std::size_t p = 0; p < pred.size(); ++p) seq[p] = rank[pred[p]];
    return detail::count_inversions(seq, buf, 0, seq.size());
}

/// Kendall tau-a scaled to [-100, 100].
inline double kendall_tau(const Permutation& pred, const Permutation& truth) {
    require(pred.size() >= 2, "kendall_tau: needs n >= 2, got " + std::to_string(pred.size()));
    const double n = static_cast<double>(pred.size());
    const double pairs = n * (n - 1) / 2;
    return 100.0 * (1.0 - 2.0 * static_cast<double>(discordant_pairs(pred, truth)) / pairs);
}

inline double pmr(const std::vector<Permutation>& preds, const std::vector<Permutation>& truths) {
    require(preds.size() == truths.size(), "pmr: list length mismatch");
    if (preds.empty()) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        require(preds[i].size() == truths[i].size(), "pmr: permutation length mismatch at " + std::to_string(i));
        hit += preds[i] == truths[i];
    }
    return 100.0 * static_cast<double>(hit) / static_cast<double>(preds.size());
}

using Checker = std::function<bool(const Instance&, const Permutation&)>;

inline double validity_rate(const Checker& check, const Dataset& instances, const std::vector<Permutation>& preds) {
    require(instances.size() == preds.size(), "validity_rate: length mismatch");
    if (preds.empty()) return 0.0;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) ok += check(instances[i], preds[i]);
    return 100.0 * static_cast<double>(ok) / static_cast<double>(preds.size());
}

inline double avg_tour_length(const Dataset& instances, const std::vector<Permutation>& preds, bool closed) {
    require(instances.size() == preds.size() && !preds.empty(), "avg_tour_length: need matched non-empty lists");
    double total = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) total += tour_length(instances[i].elements, preds[i], closed);
    return total / static_cast<double>(preds.size());
}

inline bool is_grammar_task(const Instance& inst) { return inst.task.rfind("grammar:", 0) == 0; }

/// Task checker for grammars and rulesets; empty for tasks without one.
inline Checker checker_for(const Instance& inst) {
    if (is_grammar_task(inst)) {
        return [](const Instance& i, const Permutation& p) { return check_grammar(grammar_kind_of(i), ordered_symbols(i, p)); };
    }
    if (inst.task == "ruleset") return [](const Instance& i, const Permutation& p) { return check_ruleset(i, p); };
    return {};
}

/// Prediction in the form compared against stored targets: grammar
/// duplicates are reordered the same way the generator orders them.
inline Permutation comparable_prediction(const Instance& inst, const Permutation& pred) {
    return is_grammar_task(inst) ? canonical_grammar_order(inst, pred) : pred;
}

struct Summary {
    double mean = 0.0;
    double std = 0.0;  // sample (n - 1) standard deviation; 0 for a single value
    std::size_t count = 0;
};

inline Summary summarize(const std::vector<double>& xs) {
    require(!xs.empty(), "summarize: no values");
    Summary s;
    s.count = xs.size();
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return s;
}

}  // namespace set2seq
