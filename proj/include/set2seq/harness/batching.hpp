#pragma once

#include <algorithm>
#include <vector>

#include "set2seq/data/instance.hpp"
#include "set2seq/numerics/rng.hpp"

namespace set2seq {

/// Instances padded to a common cardinality. Real rows come first in every
/// slice and are flagged in the matching mask.
template <class T>
struct TrainBatch {
    std::vector<std::size_t> ids;
    Eigen::Index n_max = 0;
    std::vector<Matrix<T>> elements;  // B slices of n_max x d_raw
    std::vector<Mask> masks;
    std::vector<Permutation> targets;
    std::vector<std::size_t> cardinalities;

    std::size_t size() const { return ids.size(); }
};

template <class T>
TrainBatch<T> make_batch(const Dataset& ds, const std::vector<std::size_t>& ids) {
    require(!ids.empty(), "make_batch: empty batch");
    TrainBatch<T> b;
    b.ids = ids;
    const Eigen::Index d = ds[ids.front()].dim();
    for (auto i : ids) {
        require(ds[i].dim() == d, "make_batch: element width " + std::to_string(ds[i].dim()) + " != " + std::to_string(d));
        b.n_max = std::max(b.n_max, ds[i].elements.rows());
    }
    for (auto i : ids) {
        const auto& inst = ds[i];
        Matrix<T> x = Matrix<T>::Zero(b.n_max, d);
        x.topRows(inst.elements.rows()) = inst.elements.template cast<T>();
        Mask m(static_cast<std::size_t>(b.n_max), 0);
        std::fill(m.begin(), m.begin() + inst.elements.rows(), 1);
        b.elements.push_back(std::move(x));
        b.masks.push_back(std::move(m));
        b.cardinalities.push_back(inst.size());
        if (inst.target) b.targets.push_back(*inst.target);
    }
    return b;
}

/// Shuffled mini-batch index lists. With bucketing, a shuffled pool of
/// 50 batches is sorted by cardinality before being cut, so batches hold
/// sets of similar size; batch order is shuffled afterwards.
inline std::vector<std::vector<std::size_t>> plan_batches(const Dataset& ds, std::size_t batch_size, SeededRng& rng, bool bucketing) {
    require(batch_size >= 1, "plan_batches: batch_size must be >= 1");
    auto order = rng.permutation(ds.size());
    if (bucketing) {
        const std::size_t pool = batch_size * 50;
        for (std::size_t lo = 0; lo < order.size(); lo += pool) {
            const auto hi = std::min(order.size(), lo + pool);
            std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(lo), order.begin() + static_cast<std::ptrdiff_t>(hi),
                             [&](std::size_t a, std::size_t b) { return ds[a].size() < ds[b].size(); });
        }
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t lo = 0; lo < order.size(); lo += batch_size)
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(lo),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), lo + batch_size)));
    if (bucketing) rng.shuffle(batches.begin(), batches.end());
    return batches;
}

}  // namespace set2seq
