#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "set2seq/numerics/autodiff.hpp"
#include "set2seq/numerics/parameters.hpp"
#include "set2seq/numerics/rng.hpp"

namespace set2seq {

struct GradCheckEntry {
    std::string name;
    std::size_t coords_checked = 0;
    double max_rel_error = 0.0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double tol = 1e-3;

    double worst() const {
        double w = 0;
        for (const auto& e : entries) w = std::max(w, e.max_rel_error);
        return w;
    }
    bool passed() const { return worst() < tol; }
};

/// Compares reverse-mode gradients with central differences
/// (L(p+eps) - L(p-eps)) / (2 eps) on up to `max_coords` coordinates per
/// parameter (0 = every coordinate). Relative error is
/// |a - b| / max(|a|, |b|, 1e-8). `loss_fn` must record its loss on the tape
/// it is given and be deterministic.
template <class T>
GradCheckReport grad_check(ParameterStore<T>& store, const std::function<Var<T>(Tape<T>&)>& loss_fn, double eps = 1e-5,
                           double tol = 1e-3, std::size_t max_coords = 0, std::uint64_t seed = 0) {
    store.zero_grads();
    {
        Tape<T> tape(true);
        auto loss = loss_fn(tape);
        tape.backward(loss);
    }
    auto eval = [&]() {
        Tape<T> tape(false);
        return static_cast<double>(loss_fn(tape).scalar());
    };
    SeededRng rng(seed);
    GradCheckReport report;
    report.tol = tol;
    for (auto& p : store) {
        GradCheckEntry e;
        e.name = p.name;
        std::vector<Eigen::Index> coords(static_cast<std::size_t>(p.value.size()));
        for (Eigen::Index i = 0; i < p.value.size(); ++i) coords[static_cast<std::size_t>(i)] = i;
        if (max_coords > 0 && coords.size() > max_coords) {
            rng.shuffle(coords.begin(), coords.end());
            coords.resize(max_coords);
        }
        for (auto i : coords) {
            T& x = p.value.data()[i];
            const T orig = x;
            x = static_cast<T>(orig + eps);
            const double up = eval();
            x = static_cast<T>(orig - eps);
            const double down = eval();
            x = orig;
            const double numeric = (up - down) / (2 * eps);
            const double analytic = static_cast<double>(p.grad.data()[i]);
            const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            if (rel >= e.max_rel_error) {
                e.max_rel_error = rel;
                e.analytic_at_worst = analytic;
                e.numeric_at_worst = numeric;
            }
            ++e.coords_checked;
        }
        report.entries.push_back(e);
    }
    return report;
}

}  // namespace set2seq
