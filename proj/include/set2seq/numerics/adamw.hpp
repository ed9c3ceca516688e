#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "set2seq/error.hpp"
#include "set2seq/numerics/parameters.hpp"

namespace set2seq {

struct AdamwHyper {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
};

template <class T>
struct AdamwState {
    std::vector<Matrix<T>> m;  // first moments, one per parameter
    std::vector<Matrix<T>> v;  // second moments
    std::uint64_t step = 0;

    static AdamwState for_store(const ParameterStore<T>& store) {
        AdamwState s;
        for (const auto& p : store) {
            s.m.push_back(Matrix<T>::Zero(p.value.rows(), p.value.cols()));
            s.v.push_back(Matrix<T>::Zero(p.value.rows(), p.value.cols()));
        }
        return s;
    }
};

/// One AdamW update with decoupled weight decay:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
///   p <- p - lr (m_hat / (sqrt(v_hat) + eps) + wd p)
/// Gradients are validated before anything is modified, so a NaN leaves
/// both the store and the state untouched.
template <class T>
void adamw_step(ParameterStore<T>& store, AdamwState<T>& state, const AdamwHyper& h) {
    require(h.lr > 0 && h.eps > 0 && h.weight_decay >= 0, "adamw_step: hyperparameters must be positive");
    require(h.beta1 > 0 && h.beta1 < 1 && h.beta2 > 0 && h.beta2 < 1, "adamw_step: betas must lie in (0,1)");
    require(state.m.size() == store.size(), "adamw_step: optimizer state does not match parameter store");
    for (const auto& p : store) {
        if (!p.grad.allFinite()) {
            throw Error("adamw_step: non-finite gradient in parameter " + p.name);
        }
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(h.beta1, t);
    const double c2 = 1.0 - std::pow(h.beta2, t);
    const T b1 = static_cast<T>(h.beta1);
    const T b2 = static_cast<T>(h.beta2);
    const T lr = static_cast<T>(h.lr);
    const T wd = static_cast<T>(h.weight_decay);
    const T eps = static_cast<T>(h.eps);
    const T inv_c1 = static_cast<T>(1.0 / c1);
    const T inv_c2 = static_cast<T>(1.0 / c2);
    for (std::size_t i = 0; i < store.size(); ++i) {
        auto& p = store[i];
        auto& m = state.m[i];
        auto& v = state.v[i];
        const Eigen::Index n = p.value.size();
        T* pv = p.value.data();
        const T* g = p.grad.data();
        T* pm = m.data();
        T* pw = v.data();
        for (Eigen::Index k = 0; k < n; ++k) {
            pm[k] = b1 * pm[k] + (1 - b1) * g[k];
            pw[k] = b2 * pw[k] + (1 - b2) * g[k] * g[k];
            const T mh = pm[k] * inv_c1;
            const T vh = pw[k] * inv_c2;
            pv[k] -= lr * (mh / (std::sqrt(vh) + eps) + wd * pv[k]);
        }
    }
}

}  // namespace set2seq
