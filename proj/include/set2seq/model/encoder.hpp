#pragma once

// Set encoder: multi-head self-attention for per-element embeddings, pooling
// by multi-head attention (PMA) for the set vector, and the stack of
// interdependence layers that attend jointly over the elements and the set
// vector appended as one extra row.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "set2seq/error.hpp"
#include "set2seq/model/context.hpp"

namespace set2seq {

enum class Sigma { softmax, tanh, relu };

inline std::string to_string(Sigma s) {
    switch (s) {
    case Sigma::softmax:
        return "softmax";
    case Sigma::tanh:
        return "tanh";
    case Sigma::relu:
        return "relu";
    }
    return "?";
}

inline Sigma sigma_from_string(const std::string& s) {
    if (s == "softmax") return Sigma::softmax;
    if (s == "tanh") return Sigma::tanh;
    if (s == "relu") return Sigma::relu;
    throw Error("unknown sigma '" + s + "' (expected softmax|tanh|relu)");
}

struct EncoderConfig {
    int d_input = 2;
    int d_model = 64;
    int n_heads = 2;
    int n_sit_layers = 2;
    Sigma sigma = Sigma::softmax;
    bool use_residual = true;
    bool use_layer_norm = true;
    // Adds the projected input back onto the first attention block's output.
    // Off gives the bare Concat(H)W^O form.
    bool basic_residual = true;
    // Off = ablation: plain self-attention layers on the elements, set vector
    // pooled once at the end.
    bool augment_set = true;
    double dropout = 0.0;

    int head_width() const { return d_model / n_heads; }

    void validate() const {
        require(d_input >= 1, "EncoderConfig: d_input must be >= 1");
        require(d_model >= 1 && n_heads >= 1, "EncoderConfig: d_model and n_heads must be >= 1");
        require(d_model % n_heads == 0, "EncoderConfig: d_model " + std::to_string(d_model) +
                                            " not divisible by n_heads " + std::to_string(n_heads));
        require(n_sit_layers >= 0, "EncoderConfig: n_sit_layers must be >= 0");
        require(dropout >= 0.0 && dropout < 1.0, "EncoderConfig: dropout must lie in [0,1)");
    }
};

// Query/key/value projections are stored as d_model x d_model matrices whose
// column block i (width d_model/m) is head i's projection.
struct MhaWeights {
    std::size_t wq, wk, wv, wo;
};

struct PmaWeights {
    std::size_t seeds;  // m x d_model, row j is head j's seed
    std::size_t wq, wk, wv, wo;
};

struct SitLayerWeights {
    MhaWeights att;
    std::size_t ln_gain, ln_bias;
};

struct EncoderWeights {
    std::size_t in_w, in_b;
    MhaWeights basic;
    PmaWeights pma;
    std::vector<SitLayerWeights> sit;

    template <class T>
    static EncoderWeights create(ParameterStore<T>& store, const EncoderConfig& cfg, SeededRng& rng) {
        cfg.validate();
        const Eigen::Index d = cfg.d_model;
        auto mha = [&](const std::string& prefix) {
            MhaWeights w{};
            w.wq = store.add(init_param<T>(prefix + ".wq", d, d, rng));
            w.wk = store.add(init_param<T>(prefix + ".wk", d, d, rng));
            w.wv = store.add(init_param<T>(prefix + ".wv", d, d, rng));
            w.wo = store.add(init_param<T>(prefix + ".wo", d, d, rng));
            return w;
        };
        EncoderWeights w{};
        w.in_w = store.add(init_param<T>("enc.input.w", cfg.d_input, d, rng));
        w.in_b = store.add(init_param<T>("enc.input.b", 1, d, rng, InitKind::zeros));
        w.basic = mha("enc.basic");
        w.pma.seeds = store.add(init_param<T>("enc.pma.seeds", cfg.n_heads, d, rng));
        w.pma.wq = store.add(init_param<T>("enc.pma.wq", d, d, rng));
        w.pma.wk = store.add(init_param<T>("enc.pma.wk", d, d, rng));
        w.pma.wv = store.add(init_param<T>("enc.pma.wv", d, d, rng));
        w.pma.wo = store.add(init_param<T>("enc.pma.wo", d, d, rng));
        for (int l = 0; l < cfg.n_sit_layers; ++l) {
            const std::string prefix = "enc.sit" + std::to_string(l);
            SitLayerWeights s{};
            s.att = mha(prefix);
            s.ln_gain = store.add(init_param<T>(prefix + ".ln_gain", 1, d, rng, InitKind::ones));
            s.ln_bias = store.add(init_param<T>(prefix + ".ln_bias", 1, d, rng, InitKind::zeros));
            w.sit.push_back(s);
        }
        return w;
    }
};

/// Encoder output. `elements` is n x d_model (E'), `set` is 1 x d_model (s').
template <class T>
struct EncodedSet {
    Var<T> elements;
    Var<T> set;
    Mask pad_mask;
};

namespace detail {

template <class T>
Matrix<T> key_mask_matrix(Eigen::Index rows, const Mask& key_mask) {
    Matrix<T> m(rows, static_cast<Eigen::Index>(key_mask.size()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        m.col(c).setConstant(key_mask[c] ? T(1) : T(0));
    }
    return m;
}

// Per-head scaled-score attention on already-projected q/k/v (column block h
// belongs to head h). Returns the concatenated head outputs.
template <class T>
Var<T> attend_heads(Context<T>& ctx, Var<T> q, Var<T> k, Var<T> v, int n_heads, T scale, Sigma sigma,
                    const Mask& key_mask, double dropout) {
    require(static_cast<Eigen::Index>(key_mask.size()) == k.rows(),
            "attention: key mask length " + std::to_string(key_mask.size()) + " does not match " +
                std::to_string(k.rows()) + " keys");
    require(count_set(key_mask) > 0, "attention: all keys masked (empty set)");
    const Eigen::Index hw = q.cols() / n_heads;
    std::vector<Var<T>> heads;
    heads.reserve(static_cast<std::size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
        auto qh = n_heads == 1 ? q : ad::slice_cols(q, h * hw, hw);
        auto kh = n_heads == 1 ? k : ad::slice_cols(k, h * hw, hw);
        auto vh = n_heads == 1 ? v : ad::slice_cols(v, h * hw, hw);
        auto scores = ad::scale(ad::matmul_nt(qh, kh), scale);
        Var<T> a;
        switch (sigma) {
        case Sigma::softmax:
            a = ad::softmax_rows(scores, key_mask);
            break;
        case Sigma::tanh:
            a = ad::mul_const(ad::tanh(scores), key_mask_matrix<T>(scores.rows(), key_mask));
            break;
        case Sigma::relu:
            a = ad::mul_const(ad::relu(scores), key_mask_matrix<T>(scores.rows(), key_mask));
            break;
        }
        a = ctx.dropout(a, dropout);
        heads.push_back(ad::matmul(a, vh));
    }
    return n_heads == 1 ? heads.front() : ad::concat_cols(heads);
}

}  // namespace detail

/// Multi-head attention of xq over xkv:
///   H_i = softmax(Q_i K_i^T / sqrt(d_k)) V_i, output = Concat(H_1..H_m) W^O
/// with d_k = d_model / m. Keys with key_mask == 0 get zero weight.
template <class T>
Var<T> multi_head_attention(Context<T>& ctx, Var<T> xq, Var<T> xkv, const MhaWeights& w, int n_heads,
                            const Mask& key_mask) {
    require(xq.cols() == xkv.cols(), "multi_head_attention: query and key widths differ");
    require(xq.cols() % n_heads == 0, "multi_head_attention: width not divisible by head count");
    const T scale = T(1) / std::sqrt(static_cast<T>(xq.cols() / n_heads));
    auto q = ad::matmul(xq, ctx.p(w.wq));
    auto k = ad::matmul(xkv, ctx.p(w.wk));
    auto v = ad::matmul(xkv, ctx.p(w.wv));
    auto h = detail::attend_heads(ctx, q, k, v, n_heads, scale, Sigma::softmax, key_mask, 0.0);
    return ad::matmul(h, ctx.p(w.wo));
}

/// Permutation-equivariant element embeddings by self-attention (no
/// positional encoding, no dropout).
template <class T>
Var<T> encode_elements(Context<T>& ctx, Var<T> x, const MhaWeights& w, int n_heads, const Mask& mask) {
    return multi_head_attention(ctx, x, x, w, n_heads, mask);
}

/// Pooling by multi-head attention: head j attends from seed k_j over the
/// unmasked rows of e. Output 1 x d_model, invariant to the row order of e.
template <class T>
Var<T> pma(Context<T>& ctx, Var<T> e, const PmaWeights& w, int n_heads, const Mask& mask) {
    require(e.rows() >= 1, "pma: empty set");
    const Eigen::Index d = e.cols();
    const Eigen::Index hw = d / n_heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(hw));
    auto q_all = ad::matmul(ctx.p(w.seeds), ctx.p(w.wq));  // m x d, head j uses row j, block j
    auto k = ad::matmul(e, ctx.p(w.wk));
    auto v = ad::matmul(e, ctx.p(w.wv));
    std::vector<Var<T>> heads;
    for (int j = 0; j < n_heads; ++j) {
        auto qj = ad::slice_cols(ad::slice_rows(q_all, j, 1), j * hw, hw);
        auto kj = ad::slice_cols(k, j * hw, hw);
        auto vj = ad::slice_cols(v, j * hw, hw);
        auto a = ad::softmax_rows(ad::scale(ad::matmul_nt(qj, kj), scale), mask);
        heads.push_back(ad::matmul(a, vj));
    }
    auto s = n_heads == 1 ? heads.front() : ad::concat_cols(heads);
    return ad::matmul(s, ctx.p(w.wo));
}

/// S = (E | s): the set vector becomes the final row.
template <class T>
Var<T> augment(Var<T> e, Var<T> s) {
    require(e.cols() == s.cols() && s.rows() == 1, "augment: widths must match and s must be a single row");
    return ad::concat_rows<T>({e, s});
}

/// Inverse of augment: last row is the set vector, the rest are elements.
template <class T>
std::pair<Var<T>, Var<T>> split(Var<T> s_pi) {
    require(s_pi.rows() >= 2, "split: need at least 2 rows, got " + std::to_string(s_pi.rows()));
    const Eigen::Index n = s_pi.rows() - 1;
    return {ad::slice_rows(s_pi, 0, n), ad::slice_rows(s_pi, n, 1)};
}

/// One interdependence layer over the augmented matrix:
///   per head sigma((S W^Q)(S W^K)^T / sqrt(d_s)) (S W^V), d_s = d_model,
/// heads concatenated and projected, then optional residual and layer norm.
/// In ablation mode the same layer runs on the bare element matrix.
template <class T>
Var<T> sit_layer(Context<T>& ctx, Var<T> s_pi, const SitLayerWeights& w, const EncoderConfig& cfg, const Mask& mask) {
    require(s_pi.cols() == cfg.d_model, "sit_layer: input width " + std::to_string(s_pi.cols()) +
                                            " != d_model " + std::to_string(cfg.d_model));
    const T scale = T(1) / std::sqrt(static_cast<T>(cfg.d_model));
    auto q = ad::matmul(s_pi, ctx.p(w.att.wq));
    auto k = ad::matmul(s_pi, ctx.p(w.att.wk));
    auto v = ad::matmul(s_pi, ctx.p(w.att.wv));
    auto h = detail::attend_heads(ctx, q, k, v, cfg.n_heads, scale, cfg.sigma, mask, cfg.dropout);
    auto out = ad::matmul(h, ctx.p(w.att.wo));
    if (cfg.use_residual) {
        out = ad::add(out, s_pi);
    }
    if (cfg.use_layer_norm) {
        out = ad::add_row(ad::mul_row(ad::layer_norm_rows(out), ctx.p(w.ln_gain)), ctx.p(w.ln_bias));
    }
    return out;
}

/// Full encoder. x is n x d_input; mask marks real (1) vs padding (0) rows.
template <class T>
EncodedSet<T> encode_set(Context<T>& ctx, Var<T> x, const EncoderWeights& w, const EncoderConfig& cfg,
                         const Mask& mask) {
    require(x.rows() >= 1, "encode_set: empty set");
    require(x.cols() == cfg.d_input, "encode_set: input width " + std::to_string(x.cols()) + " != d_input " +
                                         std::to_string(cfg.d_input));
    require(static_cast<Eigen::Index>(mask.size()) == x.rows(), "encode_set: mask length does not match rows");
    require(count_set(mask) >= 1, "encode_set: every row is padding");
    auto proj = ad::add_row(ad::matmul(x, ctx.p(w.in_w)), ctx.p(w.in_b));
    auto e = encode_elements(ctx, proj, w.basic, cfg.n_heads, mask);
    if (cfg.basic_residual) {
        e = ad::add(e, proj);
    }
    if (!cfg.augment_set) {
        for (const auto& layer : w.sit) {
            e = sit_layer(ctx, e, layer, cfg, mask);
        }
        return {e, pma(ctx, e, w.pma, cfg.n_heads, mask), mask};
    }
    auto s = pma(ctx, e, w.pma, cfg.n_heads, mask);
    if (w.sit.empty()) {
        return {e, s, mask};
    }
    Mask aug_mask = mask;
    aug_mask.push_back(1);  // the set row is never masked
    auto s_pi = augment(e, s);
    for (const auto& layer : w.sit) {
        s_pi = sit_layer(ctx, s_pi, layer, cfg, aug_mask);
    }
    auto [e_out, s_out] = split(s_pi);
    return {e_out, s_out, mask};
}

}  // namespace set2seq
