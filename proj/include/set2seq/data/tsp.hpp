#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "set2seq/data/instance.hpp"
#include "set2seq/error.hpp"
#include "set2seq/numerics/rng.hpp"
#include "set2seq/parallel.hpp"

namespace set2seq {

inline constexpr std::size_t kHeldKarpMaxN = 20;
inline constexpr std::size_t kTspTargetMaxN = 13;

struct TspConfig {
    int n_min = 5;
    int n_max = 10;
    std::size_t count = 1000;
    bool closed_tour = true;
    bool with_targets = true;
    std::uint64_t seed = 0;

    void validate() const {
        require(n_min >= 3 && n_min <= n_max, "tsp: need 3 <= n_min <= n_max");
        require(!with_targets || n_max <= static_cast<int>(kTspTargetMaxN),
                "tsp: training targets need n_max <= " + std::to_string(kTspTargetMaxN));
    }
};

inline double point_distance(const Matrix<double>& pts, std::size_t a, std::size_t b) {
    return (pts.row(static_cast<Eigen::Index>(a)) - pts.row(static_cast<Eigen::Index>(b))).norm();
}

inline double tour_length(const Matrix<double>& pts, const Permutation& perm, bool closed) {
    require(perm.size() == static_cast<std::size_t>(pts.rows()), "tour_length: permutation size mismatch");
    double len = 0;
    for (std::size_t i = 1; i < perm.size(); ++i) len += point_distance(pts, perm[i - 1], perm[i]);
    if (closed && perm.size() > 1) len += point_distance(pts, perm[perm.size() - 1], perm[0]);
    return len;
}

struct TourResult {
    Permutation tour;
    double length = 0;
};

namespace detail {

// Exact shortest Hamiltonian cycle through node 0 of a dense distance matrix.
// Ties keep the first candidate in increasing node order.
inline std::vector<std::size_t> held_karp_cycle(const std::vector<std::vector<double>>& dist, double& length) {
    const std::size_t n = dist.size();
    if (n == 1) {
        length = 0;
        return {0};
    }
    const std::size_t m = n - 1;  // node j >= 1 is bit j-1
    const std::size_t full = (std::size_t{1} << m) - 1;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dp((full + 1) * m, inf);
    std::vector<std::uint8_t> parent((full + 1) * m, 0);
    for (std::size_t j = 0; j < m; ++j) dp[(std::size_t{1} << j) * m + j] = dist[0][j + 1];
    for (std::size_t s = 1; s <= full; ++s) {
        for (std::size_t j = 0; j < m; ++j) {
            if (!(s >> j & 1)) continue;
            const std::size_t prev = s & ~(std::size_t{1} << j);
            if (!prev) continue;
            double best = inf;
            std::uint8_t arg = 0;
            for (std::size_t k = 0; k < m; ++k) {
                if (!(prev >> k & 1)) continue;
                const double c = dp[prev * m + k] + dist[k + 1][j + 1];
                if (c < best) {
                    best = c;
                    arg = static_cast<std::uint8_t>(k);
                }
            }
            dp[s * m + j] = best;
            parent[s * m + j] = arg;
        }
    }
    double best = inf;
    std::size_t last = 0;
    for (std::size_t j = 0; j < m; ++j) {
        const double c = dp[full * m + j] + dist[j + 1][0];
        if (c < best) {
            best = c;
            last = j;
        }
    }
    length = best;
    std::vector<std::size_t> rev;
    std::size_t s = full, j = last;
    while (s) {
        rev.push_back(j + 1);
        const std::size_t p = parent[s * m + j];
        s &= ~(std::size_t{1} << j);
        j = p;
    }
    rev.push_back(0);
    return {rev.rbegin(), rev.rend()};
}

}  // namespace detail

/// Exact optimal tour. Closed: a cycle starting at index 0, oriented so the
/// second visited index is smaller than the last. Open: the shortest
/// Hamiltonian path with free endpoints, oriented so the first index is
/// smaller than the last.
inline TourResult held_karp(const Matrix<double>& pts, bool closed = true) {
    const std::size_t n = static_cast<std::size_t>(pts.rows());
    require(n >= 2 && n <= kHeldKarpMaxN, "held_karp: n must be in [2, " + std::to_string(kHeldKarpMaxN) + "], got " + std::to_string(n));
    const std::size_t off = closed ? 0 : 1;  // open: node 0 is a zero-cost depot
    std::vector<std::vector<double>> dist(n + off, std::vector<double>(n + off, 0.0));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) dist[a + off][b + off] = point_distance(pts, a, b);
    TourResult r;
    auto cyc = detail::held_karp_cycle(dist, r.length);
    std::vector<std::size_t> order;
    if (closed) {
        order = std::move(cyc);
        if (n > 2 && order[1] > order.back()) std::reverse(order.begin() + 1, order.end());
    } else {
        for (std::size_t i = 1; i < cyc.size(); ++i) order.push_back(cyc[i] - 1);
        if (order.front() > order.back()) std::reverse(order.begin(), order.end());
    }
    r.tour = Permutation(std::move(order));
    return r;
}

inline Instance make_tsp_instance(Matrix<double> pts, bool closed, bool with_target) {
    Instance inst;
    inst.task = "tsp";
    inst.meta = {{"closed", closed}};
    if (with_target) {
        auto hk = held_karp(pts, closed);
        inst.target = hk.tour;
        inst.meta["optimal_length"] = hk.length;
    }
    inst.elements = std::move(pts);
    return inst;
}

/// Points i.i.d. uniform on the unit square, n uniform in [n_min, n_max].
/// Instance i draws from stream i of the seed, so output is independent of
/// the worker count.
inline Dataset gen_tsp(const TspConfig& cfg) {
    cfg.validate();
    Dataset out(cfg.count);
    const SeededRng root(cfg.seed);
    parallel_for(cfg.count, [&](std::size_t i) {
        auto rng = root.derive(i);
        const auto n = rng.uniform_int(cfg.n_min, cfg.n_max);
        Matrix<double> pts(n, 2);
        for (Eigen::Index r = 0; r < n; ++r) {
            pts(r, 0) = rng.uniform();
            pts(r, 1) = rng.uniform();
        }
        out[i] = make_tsp_instance(std::move(pts), cfg.closed_tour, cfg.with_targets);
    });
    return out;
}

}  // namespace set2seq
