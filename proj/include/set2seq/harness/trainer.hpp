#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <string>

#include "set2seq/harness/batching.hpp"
#include "set2seq/harness/checkpoint.hpp"
#include "set2seq/harness/data.hpp"
#include "set2seq/harness/evaluate.hpp"

namespace set2seq {

struct TrainOptions {
    std::string out_dir;              // empty: keep everything in memory
    std::ostream* progress = nullptr;  // human-readable epoch lines
    std::size_t stop_after = 0;       // stop once this many epochs are done (0 = config epochs)
};

template <class T>
struct TrainOutcome {
    TrainState<T> last;
    Model<T> best;
};

struct BatchStats {
    double loss = 0, nll = 0, l_s = 0, grad_norm = 0;
};

/// One optimiser step over a padded batch: per-instance tapes, gradients
/// accumulated with weight 1/B, NaN check, clipping, AdamW.
template <class T>
BatchStats train_step(TrainState<T>& s, const TrainBatch<T>& batch) {
    auto& store = s.model.store();
    const auto lc = s.config.loss();
    store.zero_grads();
    BatchStats st;
    const T w = T(1) / static_cast<T>(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) {
        Tape<T> tape(true);
        Context<T> ctx(tape, store, true, &s.rng);
        auto r = s.model.loss(ctx, batch.elements[k], batch.masks[k], batch.targets[k], lc, &s.rng);
        const T lam = static_cast<T>(lc.paper_sign ? -lc.lambda : lc.lambda);
        auto total = ad::add(r.nll, ad::scale(r.l_s, lam));
        const double v = static_cast<double>(total.scalar());
        if (!std::isfinite(v)) throw Error("training diverged: non-finite loss on instance " + std::to_string(batch.ids[k]));
        tape.backward(total, w);
        st.loss += v / static_cast<double>(batch.size());
        st.nll += static_cast<double>(r.nll.scalar()) / static_cast<double>(batch.size());
        st.l_s += static_cast<double>(r.l_s.scalar()) / static_cast<double>(batch.size());
    }
    st.grad_norm = store.grad_norm();
    if (!std::isfinite(st.grad_norm)) throw Error("training diverged: non-finite gradient norm");
    store.clip_grad_norm(s.config.optim.clip_norm);
    AdamwHyper h;
    h.lr = s.config.optim.lr;
    h.weight_decay = s.config.optim.weight_decay;
    adamw_step(store, s.opt, h);
    return st;
}

/// One pass over the training split in shuffled (bucketed) mini-batches.
template <class T>
BatchStats train_epoch(TrainState<T>& s, const Dataset& train) {
    auto plan = plan_batches(train, s.config.optim.batch_size, s.rng, s.config.optim.bucketing);
    BatchStats sum;
    std::size_t seen = 0;
    for (const auto& ids : plan) {
        auto batch = make_batch<T>(train, ids);
        auto b = train_step(s, batch);
        const double n = static_cast<double>(ids.size());
        sum.loss += b.loss * n, sum.nll += b.nll * n, sum.l_s += b.l_s * n, sum.grad_norm += b.grad_norm * n;
        seen += ids.size();
    }
    const double n = static_cast<double>(seen);
    return {sum.loss / n, sum.nll / n, sum.l_s / n, sum.grad_norm / n};
}

namespace detail {

inline void add_report(nlohmann::json& rec, const std::string& prefix, const EvalReport& r) {
    for (const auto& [name, s] : r.metrics) rec[prefix + name] = s.mean;
}

inline void write_log(const std::string& path, const std::vector<nlohmann::json>& log) {
    std::ofstream os(path);
    require(static_cast<bool>(os), "cannot write metric log '" + path + "'");
    for (const auto& rec : log) os << rec.dump() << '\n';
}

}  // namespace detail

template <class T>
nlohmann::json validation_record(const TrainState<T>& s, const Dataset& val, double& score) {
    nlohmann::json rec = {{"epoch", s.epoch}};
    if (val.empty()) {
        score = 0;
        return rec;
    }
    auto [loss, nll, ls] = teacher_forced_loss(s.model, val, s.config.loss());
    rec["val_loss"] = loss;
    rec["val_nll"] = nll;
    rec["val_l_s"] = ls;
    auto r = score_predictions(val, predict(s.model, val), val.front().task, s.config.data.tsp.closed_tour, false);
    detail::add_report(rec, "val_", r);
    score = selection_score(r);
    return rec;
}

/// Fixed-epoch training with best-validation model selection. `state`
/// carries everything needed to resume; records land in state.log.
template <class T>
TrainOutcome<T> train(TrainState<T> state, const Splits& data, const TrainOptions& opt = {}) {
    namespace fs = std::filesystem;
    const auto& cfg = state.config;
    validate_config(cfg);
    require(data.train.front().dim() == state.d_input,
            "train: data element width " + std::to_string(data.train.front().dim()) + " != model d_input " + std::to_string(state.d_input));
    if (!opt.out_dir.empty()) fs::create_directories(opt.out_dir);
    auto path = [&](const std::string& f) { return (fs::path(opt.out_dir) / f).string(); };

    Model<T> best = state.model;
    if (!opt.out_dir.empty() && state.epoch > 0 && fs::exists(path("best.ckpt"))) best = load_checkpoint<T>(path("best.ckpt")).model;

    if (state.epoch == 0 && state.log.empty()) {
        double score = 0;
        state.log.push_back(validation_record(state, data.val, score));
        state.best_score = score;
        if (state.log.back().contains("val_loss")) state.best_loss = state.log.back()["val_loss"].template get<double>();
        if (!opt.out_dir.empty()) {
            save_checkpoint(state, path("best.ckpt"));
            detail::write_log(path("metrics.jsonl"), state.log);
        }
    }
    const std::size_t target = opt.stop_after ? std::min(opt.stop_after, cfg.optim.epochs) : cfg.optim.epochs;
    while (state.epoch < target) {
        const auto t0 = std::chrono::steady_clock::now();
        auto st = train_epoch(state, data.train);
        ++state.epoch;
        nlohmann::json rec = {{"epoch", state.epoch}};
        double score = state.best_score;
        if (state.epoch % cfg.eval_every == 0 || state.epoch == cfg.optim.epochs) rec = validation_record(state, data.val, score);
        rec["train_loss"] = st.loss;
        rec["train_nll"] = st.nll;
        rec["train_l_s"] = st.l_s;
        rec["grad_norm"] = st.grad_norm;
        const double loss = rec.contains("val_loss") ? rec["val_loss"].get<double>() : state.best_loss;
        const bool improved = score > state.best_score || (score == state.best_score && loss < state.best_loss);
        if (improved) {
            state.best_score = score;
            state.best_loss = loss;
            state.best_epoch = state.epoch;
            best = state.model;
        }
        state.log.push_back(rec);
        if (!opt.out_dir.empty()) {
            if (improved) save_checkpoint(state, path("best.ckpt"));
            save_checkpoint(state, path("last.ckpt"));
            detail::write_log(path("metrics.jsonl"), state.log);
        }
        if (opt.progress) {
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            *opt.progress << "epoch " << state.epoch << "/" << cfg.optim.epochs << " loss " << st.loss;
            if (rec.contains("val_loss")) *opt.progress << " val_loss " << rec["val_loss"].get<double>();
            for (const char* m : {"val_validity", "val_pmr", "val_tour_length"})
                if (rec.contains(m)) *opt.progress << ' ' << m << ' ' << rec[m].get<double>();
            *opt.progress << " (" << secs << "s)" << std::endl;
        }
    }
    return {std::move(state), std::move(best)};
}

/// Precision dispatch: fn is a generic lambda taking a type tag.
template <class Fn>
decltype(auto) with_precision(Precision p, Fn&& fn) {
    if (p == Precision::dbl) return fn(double{});
    return fn(float{});
}

}  // namespace set2seq
