#pragma once

// Pointer decoder. An LSTM initialised from the set vector walks the output
// sequence; at every step each remaining candidate j is scored as
//   v . tanh(W1 h + W2 M[j] + We e'_j)
// where M[j] = (F_j | G_j) is pairwise context:
//   F_j  future:  mean over other remaining k of sigmoid(f(j,k)) * emb_f(j,k)
//   G_j  history: mean over already selected u of emb_h(u,j)
// Both pair heads are two-layer tanh MLPs on concatenated element pairs that
// emit a d_model embedding plus one precedence logit. The logits feed the
// auxiliary pairwise-ordering loss.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "set2seq/error.hpp"
#include "set2seq/model/context.hpp"
#include "set2seq/model/encoder.hpp"
#include "set2seq/permutation.hpp"

namespace set2seq {

struct DecoderConfig {
    int d_att = 0;        // pointer attention width; 0 = d_model
    int pair_hidden = 0;  // pair-head hidden width; 0 = d_model
    // Zero pointer vector v at init, so every candidate starts equally likely.
    bool symmetric_init = true;
};

struct LossConfig {
    double lambda = 0.1;
    int pair_cap = 32;  // pairs sampled per decode step for the pairwise loss; <= 0 = all
    // true: mean(nll) - lambda * mean(l_s), the sign as printed in the
    // original objective. false: mean(nll) + lambda * mean(l_s).
    bool paper_sign = false;
};

struct PairHeadWeights {
    std::size_t w1, b1, w2, b2;  // w1: 2d x h, w2: h x (d + 1)
};

struct DecoderWeights {
    std::size_t lstm_wx, lstm_wh, lstm_b;  // gate blocks i | f | g | o
    std::size_t start;                     // learned step-0 input
    std::size_t w1, w2, we, v;             // pointer
    PairHeadWeights future, history;

    template <class T>
    static DecoderWeights create(ParameterStore<T>& store, int d_model, const DecoderConfig& cfg, SeededRng& rng) {
        const Eigen::Index d = d_model;
        const Eigen::Index a = cfg.d_att > 0 ? cfg.d_att : d_model;
        const Eigen::Index h = cfg.pair_hidden > 0 ? cfg.pair_hidden : d_model;
        DecoderWeights w{};
        w.lstm_wx = store.add(init_param<T>("dec.lstm.wx", d, 4 * d, rng));
        w.lstm_wh = store.add(init_param<T>("dec.lstm.wh", d, 4 * d, rng));
        w.lstm_b = store.add(init_param<T>("dec.lstm.b", 1, 4 * d, rng, InitKind::zeros));
        w.start = store.add(init_param<T>("dec.start", 1, d, rng));
        w.w1 = store.add(init_param<T>("dec.ptr.w1", d, a, rng));
        w.w2 = store.add(init_param<T>("dec.ptr.w2", 2 * d, a, rng));
        w.we = store.add(init_param<T>("dec.ptr.we", d, a, rng));
        w.v = store.add(init_param<T>("dec.ptr.v", 1, a, rng, cfg.symmetric_init ? InitKind::zeros : InitKind::glorot));
        auto head = [&](const std::string& prefix) {
            PairHeadWeights p{};
            p.w1 = store.add(init_param<T>(prefix + ".w1", 2 * d, h, rng));
            p.b1 = store.add(init_param<T>(prefix + ".b1", 1, h, rng, InitKind::zeros));
            p.w2 = store.add(init_param<T>(prefix + ".w2", h, d + 1, rng));
            p.b2 = store.add(init_param<T>(prefix + ".b2", 1, d + 1, rng, InitKind::zeros));
            return p;
        };
        w.future = head("dec.future");
        w.history = head("dec.history");
        return w;
    }
};

template <class T>
struct DecodeState {
    Var<T> h;  // 1 x d
    Var<T> c;  // 1 x d
    std::vector<std::size_t> selected;
    Mask candidate_mask;  // 1 = still available

    std::size_t remaining() const { return count_set(candidate_mask); }
};

/// Per-instance pair tables; e' is fixed during decoding so these are built once.
template <class T>
struct PairTables {
    Eigen::Index n = 0;
    Var<T> future_emb;     // (n*n) x d, row j*n+k embeds (e_j, e_k)
    Var<T> future_logit;   // n x n, (j,k): logit that j precedes k
    Var<T> future_gate;    // sigmoid(future_logit)
    Var<T> history_emb;    // (n*n) x d, row j*n+u embeds (e_u, e_j)
    Var<T> history_logit;  // n x n, (j,u): logit that u precedes j
};

struct PairRef {
    std::size_t first, second;  // future: (j, k); history: (u, j)
};

template <class T>
struct PairContext {
    Var<T> m;  // n x 2d, row j = (F_j | G_j)
    std::vector<PairRef> future_pairs;
    std::vector<PairRef> history_pairs;
};

template <class T>
struct TeacherForcedLoss {
    Var<T> nll;
    Var<T> l_s;
    std::size_t pair_count = 0;
};

template <class T>
struct GreedyResult {
    Permutation order;
    std::vector<Matrix<T>> log_probs;  // one 1 x n row per step (masked = -inf)
};

template <class T>
DecodeState<T> initial_state(Context<T>& ctx, const EncodedSet<T>& enc) {
    DecodeState<T> s;
    s.h = enc.set;
    s.c = ctx.constant(Matrix<T>::Zero(1, enc.set.cols()));
    s.candidate_mask = enc.pad_mask;
    return s;
}

/// Standard LSTM cell: gates = x Wx + h Wh + b split into i, f, g, o;
/// c' = sig(f) c + sig(i) tanh(g); h' = sig(o) tanh(c').
template <class T>
DecodeState<T> lstm_step(Context<T>& ctx, const DecoderWeights& w, const DecodeState<T>& state, Var<T> input) {
    const Eigen::Index d = state.h.cols();
    require(input.rows() == 1 && input.cols() == d, "lstm_step: input must be 1 x " + std::to_string(d));
    auto gates = ad::add_row(ad::add(ad::matmul(input, ctx.p(w.lstm_wx)), ad::matmul(state.h, ctx.p(w.lstm_wh))),
                             ctx.p(w.lstm_b));
    auto i = ad::sigmoid(ad::slice_cols(gates, 0, d));
    auto f = ad::sigmoid(ad::slice_cols(gates, d, d));
    auto g = ad::tanh(ad::slice_cols(gates, 2 * d, d));
    auto o = ad::sigmoid(ad::slice_cols(gates, 3 * d, d));
    DecodeState<T> next = state;
    next.c = ad::add(ad::mul(f, state.c), ad::mul(i, g));
    next.h = ad::mul(o, ad::tanh(next.c));
    return next;
}

namespace detail {

// Two-layer pair MLP over all ordered pairs. `row_first` selects whether the
// row-block index is the first element of the concatenated pair.
template <class T>
std::pair<Var<T>, Var<T>> pair_head(Context<T>& ctx, const PairHeadWeights& w, Var<T> e, bool row_first) {
    const Eigen::Index n = e.rows();
    const Eigen::Index d = e.cols();
    auto w1 = ctx.p(w.w1);
    auto first = ad::matmul(e, ad::slice_rows(w1, 0, d));
    auto second = ad::matmul(e, ad::slice_rows(w1, d, d));
    auto pre = row_first ? ad::outer_add(first, second) : ad::outer_add(second, first);
    auto hidden = ad::tanh(ad::add_row(pre, ctx.p(w.b1)));
    auto out = ad::add_row(ad::matmul(hidden, ctx.p(w.w2)), ctx.p(w.b2));
    auto emb = ad::slice_cols(out, 0, d);
    auto logit = ad::reshape(ad::slice_cols(out, d, 1), n, n);
    return {emb, logit};
}

}  // namespace detail

template <class T>
PairTables<T> build_pair_tables(Context<T>& ctx, const DecoderWeights& w, const EncodedSet<T>& enc) {
    PairTables<T> t;
    t.n = enc.elements.rows();
    std::tie(t.future_emb, t.future_logit) = detail::pair_head(ctx, w.future, enc.elements, true);
    t.future_gate = ad::sigmoid(t.future_logit);
    std::tie(t.history_emb, t.history_logit) = detail::pair_head(ctx, w.history, enc.elements, false);
    return t;
}

/// Context matrix M_i for the current step. Rows of unavailable elements are
/// zero. F_j is zero with a single candidate left; G_j is zero before the
/// first selection.
template <class T>
PairContext<T> pairwise_context(Context<T>& ctx, const PairTables<T>& tables, const DecodeState<T>& state) {
    const Eigen::Index n = tables.n;
    const auto& avail = state.candidate_mask;
    require(static_cast<Eigen::Index>(avail.size()) == n, "pairwise_context: candidate mask length mismatch");
    const std::size_t r = count_set(avail);
    require(r >= 1, "pairwise_context: no candidates left");
    PairContext<T> out;

    Matrix<T> cf = Matrix<T>::Zero(n, n);
    if (r > 1) {
        const T inv = T(1) / static_cast<T>(r - 1);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!avail[j]) continue;
            for (Eigen::Index k = 0; k < n; ++k) {
                if (k != j && avail[k]) {
                    cf(j, k) = inv;
                    out.future_pairs.push_back({static_cast<std::size_t>(j), static_cast<std::size_t>(k)});
                }
            }
        }
    }
    Matrix<T> ch = Matrix<T>::Zero(n, n);
    if (!state.selected.empty()) {
        const T inv = T(1) / static_cast<T>(state.selected.size());
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!avail[j]) continue;
            for (auto u : state.selected) {
                ch(j, static_cast<Eigen::Index>(u)) = inv;
                out.history_pairs.push_back({u, static_cast<std::size_t>(j)});
            }
        }
    }
    auto f = ad::pair_aggregate(tables.future_emb, ad::mul_const(tables.future_gate, std::move(cf)));
    auto g = ad::pair_aggregate(tables.history_emb, ctx.constant(std::move(ch)));
    out.m = ad::concat_cols<T>({f, g});
    return out;
}

/// Log-probabilities (1 x n) over the available candidates; unavailable
/// entries are -inf (probability exactly 0). `ewe` is e' We, precomputed.
template <class T>
Var<T> pointer_scores(Context<T>& ctx, const DecoderWeights& w, const DecodeState<T>& state, Var<T> ewe, Var<T> m) {
    require(state.remaining() >= 1, "pointer_scores: zero candidates");
    auto pre = ad::add(ewe, ad::matmul(m, ctx.p(w.w2)));
    auto z = ad::tanh(ad::add_row(pre, ad::matmul(state.h, ctx.p(w.w1))));
    auto scores = ad::matmul_nt(ctx.p(w.v), z);  // 1 x n
    return ad::log_softmax_rows(scores, state.candidate_mask);
}

namespace detail {

// Real rows must form a prefix [0, n_real); padding trails.
inline std::size_t real_prefix(const Mask& mask) {
    std::size_t n = 0;
    while (n < mask.size() && mask[n]) ++n;
    for (std::size_t i = n; i < mask.size(); ++i) {
        require(!mask[i], "decoder: padding rows must trail the real rows");
    }
    return n;
}

}  // namespace detail

/// Teacher-forced decoding along y. nll = -sum_i log p(y_i | y_<i);
/// l_s = mean BCE of the pair logits collected at each step (future pairs
/// labelled by precedence in y, history pairs labelled 1).
template <class T>
TeacherForcedLoss<T> teacher_forced_nll(Context<T>& ctx, const DecoderWeights& w, const EncodedSet<T>& enc,
                                        const Permutation& y, const LossConfig& cfg, SeededRng* pair_rng = nullptr,
                                        double input_dropout = 0.0) {
    const std::size_t n = detail::real_prefix(enc.pad_mask);
    require(y.size() == n, "teacher_forced_nll: target length " + std::to_string(y.size()) + " != set size " +
                               std::to_string(n));
    const Eigen::Index rows = enc.elements.rows();
    const auto pos = y.positions();

    auto state = initial_state(ctx, enc);
    auto tables = build_pair_tables(ctx, w, enc);
    auto ewe = ad::matmul(enc.elements, ctx.p(w.we));

    Matrix<T> wf = Matrix<T>::Zero(rows, rows), yf = Matrix<T>::Zero(rows, rows);
    Matrix<T> wh = Matrix<T>::Zero(rows, rows), yh = Matrix<T>::Ones(rows, rows);
    std::size_t pair_count = 0;
    std::vector<Var<T>> picks;
    picks.reserve(n);

    for (std::size_t i = 0; i < n; ++i) {
        Var<T> input = i == 0 ? ctx.p(w.start) : ad::gather_rows(enc.elements, {static_cast<Eigen::Index>(y[i - 1])});
        state = lstm_step(ctx, w, state, ctx.dropout(input, input_dropout));
        auto pc = pairwise_context(ctx, tables, state);
        auto lp = pointer_scores(ctx, w, state, ewe, pc.m);
        picks.push_back(ad::pick(lp, 0, static_cast<Eigen::Index>(y[i])));

        // Pairwise-loss bookkeeping, optionally subsampled to pair_cap.
        const std::size_t nf = pc.future_pairs.size();
        const std::size_t total = nf + pc.history_pairs.size();
        std::vector<std::size_t> chosen(total);
        for (std::size_t q = 0; q < total; ++q) chosen[q] = q;
        if (cfg.pair_cap > 0 && total > static_cast<std::size_t>(cfg.pair_cap)) {
            SeededRng fallback(0x5eedULL + i);
            SeededRng& rng = pair_rng ? *pair_rng : fallback;
            for (std::size_t q = 0; q < static_cast<std::size_t>(cfg.pair_cap); ++q) {
                std::swap(chosen[q], chosen[q + static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(total - q - 1)))]);
            }
            chosen.resize(static_cast<std::size_t>(cfg.pair_cap));
        }
        for (auto q : chosen) {
            if (q < nf) {
                const auto [j, k] = pc.future_pairs[q];
                wf(j, k) += T(1);
                yf(j, k) = pos[j] < pos[k] ? T(1) : T(0);
            } else {
                const auto [u, j] = pc.history_pairs[q - nf];
                wh(j, u) += T(1);
            }
        }
        pair_count += chosen.size();

        state.selected.push_back(y[i]);
        state.candidate_mask[y[i]] = 0;
    }

    TeacherForcedLoss<T> out;
    out.nll = ad::scale(ad::sum_scalars(picks), T(-1));
    out.pair_count = pair_count;
    if (pair_count == 0) {
        out.l_s = ctx.tape().constant_scalar(T(0));
    } else {
        auto lf = ad::bce_with_logits(tables.future_logit, std::move(yf), std::move(wf));
        auto lh = ad::bce_with_logits(tables.history_logit, std::move(yh), std::move(wh));
        out.l_s = ad::scale(ad::add(lf, lh), T(1) / static_cast<T>(pair_count));
    }
    return out;
}

/// Greedy decoding: argmax at each step, ties to the lowest index.
template <class T>
GreedyResult<T> decode_greedy(Context<T>& ctx, const DecoderWeights& w, const EncodedSet<T>& enc,
                              bool keep_log_probs = false) {
    const std::size_t n = detail::real_prefix(enc.pad_mask);
    require(n >= 1, "decode_greedy: empty set");
    auto state = initial_state(ctx, enc);
    auto tables = build_pair_tables(ctx, w, enc);
    auto ewe = ad::matmul(enc.elements, ctx.p(w.we));
    GreedyResult<T> out;
    std::vector<std::size_t> order;
    order.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Var<T> input = i == 0 ? ctx.p(w.start) : ad::gather_rows(enc.elements, {static_cast<Eigen::Index>(order.back())});
        state = lstm_step(ctx, w, state, input);
        auto pc = pairwise_context(ctx, tables, state);
        auto lp = pointer_scores(ctx, w, state, ewe, pc.m);
        const auto& row = lp.value();
        std::size_t best = 0;
        T best_v = -std::numeric_limits<T>::infinity();
        bool found = false;
        for (std::size_t j = 0; j < state.candidate_mask.size(); ++j) {
            if (!state.candidate_mask[j]) continue;
            const T v = row(0, static_cast<Eigen::Index>(j));
            if (!found || v > best_v) {
                best = j;
                best_v = v;
                found = true;
            }
        }
        if (keep_log_probs) out.log_probs.push_back(row);
        order.push_back(best);
        state.selected.push_back(best);
        state.candidate_mask[best] = 0;
    }
    out.order = Permutation(std::move(order));
    return out;
}

}  // namespace set2seq
