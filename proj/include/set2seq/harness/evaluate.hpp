#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "set2seq/harness/batching.hpp"
#include "set2seq/harness/config.hpp"
#include "set2seq/metrics/report.hpp"
#include "set2seq/parallel.hpp"

namespace set2seq {

template <class T>
std::vector<Permutation> predict(const Model<T>& model, const Dataset& ds) {
    const auto d = model.config().encoder.d_input;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        require(ds[i].dim() == d, "evaluate: instance " + std::to_string(i) + " has element width " + std::to_string(ds[i].dim()) +
                                      " but the model expects d_input = " + std::to_string(d));
    }
    std::vector<Permutation> preds(ds.size());
    parallel_for(ds.size(), [&](std::size_t i) { preds[i] = model.decode(ds[i].elements.template cast<T>()).order; });
    return preds;
}

inline double optimal_tour_length(const Instance& inst, bool closed) {
    if (inst.meta.contains("optimal_length")) return inst.meta["optimal_length"].get<double>();
    return held_karp(inst.elements, closed).length;
}

/// Per-instance metrics averaged over a dataset. `count` is the number of
/// instances each metric was computed on.
inline EvalReport score_predictions(const Dataset& ds, const std::vector<Permutation>& preds, const std::string& task, bool closed,
                                    bool with_optimal = true) {
    require(ds.size() == preds.size() && !ds.empty(), "score_predictions: need matched non-empty lists");
    EvalReport r;
    r.task = task;
    std::vector<double> tau, exact, valid, len, opt;
    const auto checker = checker_for(ds.front());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& inst = ds[i];
        if (inst.target) {
            const auto p = comparable_prediction(inst, preds[i]);
            if (inst.size() >= 2) tau.push_back(kendall_tau(p, *inst.target));
            exact.push_back(p == *inst.target ? 100.0 : 0.0);
        }
        if (checker) valid.push_back(checker(inst, preds[i]) ? 100.0 : 0.0);
        if (inst.task == "tsp") {
            len.push_back(tour_length(inst.elements, preds[i], closed));
            if (with_optimal && inst.size() <= kHeldKarpMaxN) opt.push_back(optimal_tour_length(inst, closed));
        }
    }
    if (!tau.empty()) r.metrics["tau"] = summarize(tau);
    if (!exact.empty()) r.metrics["pmr"] = summarize(exact);
    if (!valid.empty()) r.metrics["validity"] = summarize(valid);
    if (!len.empty()) r.metrics["tour_length"] = summarize(len);
    if (!opt.empty() && opt.size() == len.size()) {
        r.metrics["optimal_length"] = summarize(opt);
        r.metrics["length_ratio"] = Summary{r.metrics["tour_length"].mean / r.metrics["optimal_length"].mean, 0.0, len.size()};
    }
    return r;
}

template <class T>
EvalReport evaluate(const Model<T>& model, const Dataset& ds, const RunConfig& cfg, std::vector<Permutation>* out_preds = nullptr) {
    auto preds = predict(model, ds);
    auto r = score_predictions(ds, preds, ds.front().task, cfg.data.tsp.closed_tour);
    r.config_hash = config_hash(cfg);
    if (out_preds) *out_preds = std::move(preds);
    return r;
}

/// Mean teacher-forced loss terms without dropout; pair subsampling uses a
/// fixed stream so the value is reproducible.
template <class T>
std::array<double, 3> teacher_forced_loss(const Model<T>& model, const Dataset& ds, const LossConfig& lc) {
    std::vector<std::array<double, 2>> parts(ds.size());
    auto& store = const_cast<ParameterStore<T>&>(model.store());
    parallel_for(ds.size(), [&](std::size_t i) {
        Tape<T> tape(false);
        Context<T> ctx(tape, store, false);
        SeededRng pair_rng = SeededRng(0x7a11).derive(i);
        auto r = model.loss(ctx, ds[i].elements.template cast<T>(), full_mask(ds[i].size()), *ds[i].target, lc, &pair_rng);
        parts[i] = {static_cast<double>(r.nll.scalar()), static_cast<double>(r.l_s.scalar())};
    });
    double nll = 0, ls = 0;
    for (const auto& p : parts) nll += p[0], ls += p[1];
    nll /= static_cast<double>(ds.size());
    ls /= static_cast<double>(ds.size());
    return {combine_loss(nll, ls, lc), nll, ls};
}

/// Score used for best-checkpoint selection (higher is better).
inline double selection_score(const EvalReport& r) {
    if (r.metrics.count("validity")) return r.mean("validity");
    if (r.metrics.count("tour_length")) return -r.mean("tour_length");
    if (r.metrics.count("tau")) return r.mean("tau");
    return 0.0;
}

}  // namespace set2seq
