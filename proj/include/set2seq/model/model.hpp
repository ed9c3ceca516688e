#pragma once

#include <cstdint>
#include <vector>

#include "set2seq/model/decoder.hpp"
#include "set2seq/model/encoder.hpp"

namespace set2seq {

struct ModelConfig {
    EncoderConfig encoder;
    DecoderConfig decoder;
};

/// Encoder + decoder weights with their configuration. Plain value type:
/// copying a model copies every weight.
template <class T>
class Model {
public:
    Model() = default;

    explicit Model(const ModelConfig& cfg, std::uint64_t seed = 0) : cfg_(cfg) {
        cfg_.encoder.validate();
        SeededRng rng(seed);
        enc_ = EncoderWeights::create(store_, cfg_.encoder, rng);
        dec_ = DecoderWeights::create(store_, cfg_.encoder.d_model, cfg_.decoder, rng);
    }

    const ModelConfig& config() const { return cfg_; }
    ParameterStore<T>& store() { return store_; }
    const ParameterStore<T>& store() const { return store_; }
    const EncoderWeights& encoder_weights() const { return enc_; }
    const DecoderWeights& decoder_weights() const { return dec_; }

    EncodedSet<T> encode(Context<T>& ctx, const Matrix<T>& x, const Mask& mask) const {
        return encode_set(ctx, ctx.constant(x), enc_, cfg_.encoder, mask);
    }

    TeacherForcedLoss<T> loss(Context<T>& ctx, const Matrix<T>& x, const Mask& mask, const Permutation& y,
                              const LossConfig& lc, SeededRng* pair_rng = nullptr) const {
        auto enc = encode(ctx, x, mask);
        return teacher_forced_nll(ctx, dec_, enc, y, lc, pair_rng, cfg_.encoder.dropout);
    }

    GreedyResult<T> decode(const Matrix<T>& x, const Mask& mask, bool keep_log_probs = false) const {
        Tape<T> tape(false);
        auto& store = const_cast<ParameterStore<T>&>(store_);  // read-only on a non-recording tape
        Context<T> ctx(tape, store, false);
        auto enc = encode(ctx, x, mask);
        return decode_greedy(ctx, dec_, enc, keep_log_probs);
    }

    GreedyResult<T> decode(const Matrix<T>& x, bool keep_log_probs = false) const {
        return decode(x, full_mask(static_cast<std::size_t>(x.rows())), keep_log_probs);
    }

private:
    ModelConfig cfg_;
    ParameterStore<T> store_;
    EncoderWeights enc_{};
    DecoderWeights dec_{};
};

/// Combine per-instance terms into the training objective.
inline double combine_loss(double mean_nll, double mean_ls, const LossConfig& lc) {
    return lc.paper_sign ? mean_nll - lc.lambda * mean_ls : mean_nll + lc.lambda * mean_ls;
}

/// mean(nll) + lambda * mean(l_s) over a batch recorded on one tape.
template <class T>
Var<T> batch_loss(Context<T>& ctx, const DecoderWeights& w, const std::vector<std::pair<EncodedSet<T>, Permutation>>& batch,
                  const LossConfig& lc, SeededRng* pair_rng = nullptr) {
    require(!batch.empty(), "batch_loss: empty batch");
    std::vector<Var<T>> nll, ls;
    for (const auto& [enc, y] : batch) {
        auto r = teacher_forced_nll(ctx, w, enc, y, lc, pair_rng);
        nll.push_back(r.nll);
        ls.push_back(r.l_s);
    }
    const T inv = T(1) / static_cast<T>(batch.size());
    auto mean_nll = ad::scale(ad::sum_scalars(nll), inv);
    auto mean_ls = ad::scale(ad::sum_scalars(ls), inv);
    const T lam = static_cast<T>(lc.paper_sign ? -lc.lambda : lc.lambda);
    return ad::add(mean_nll, ad::scale(mean_ls, lam));
}

}  // namespace set2seq
