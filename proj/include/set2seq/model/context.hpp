#pragma once

#include <vector>

#include "set2seq/numerics/autodiff.hpp"
#include "set2seq/numerics/parameters.hpp"
#include "set2seq/numerics/rng.hpp"

namespace set2seq {

/// State of one forward pass: the tape being recorded, the weights it reads,
/// and whether stochastic layers (dropout) are active.
template <class T>
class Context {
public:
    Context(Tape<T>& tape, ParameterStore<T>& store, bool train = false, SeededRng* rng = nullptr)
        : tape_(tape), store_(store), train_(train), rng_(rng), cache_(store.size(), -1) {}

    Tape<T>& tape() { return tape_; }
    ParameterStore<T>& store() { return store_; }
    bool train() const { return train_; }
    SeededRng* rng() { return rng_; }

    // One tape node per parameter per pass, however often it is used.
    Var<T> p(std::size_t idx) {
        if (cache_[idx] < 0) {
            cache_[idx] = tape_.param(store_[idx]).id;
        }
        return {&tape_, cache_[idx]};
    }

    Var<T> constant(Matrix<T> m) { return tape_.constant(std::move(m)); }

    // Inverted dropout; identity outside training or when rate == 0.
    Var<T> dropout(Var<T> x, double rate) {
        if (!train_ || rate <= 0.0 || rng_ == nullptr) {
            return x;
        }
        Matrix<T> keep(x.rows(), x.cols());
        const T s = static_cast<T>(1.0 / (1.0 - rate));
        for (Eigen::Index i = 0; i < keep.size(); ++i) {
            keep.data()[i] = rng_->bernoulli(rate) ? T(0) : s;
        }
        return ad::mul_const(x, std::move(keep));
    }

private:
    Tape<T>& tape_;
    ParameterStore<T>& store_;
    bool train_;
    SeededRng* rng_;
    std::vector<int> cache_;
};

}  // namespace set2seq
