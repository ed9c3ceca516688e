#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "set2seq/error.hpp"

namespace set2seq {

inline bool is_permutation_of(const std::vector<std::size_t>& idx, std::size_t n) {
    if (idx.size() != n) {
        return false;
    }
    std::vector<bool> seen(n, false);
    for (auto i : idx) {
        if (i >= n || seen[i]) {
            return false;
        }
        seen[i] = true;
    }
    return true;
}

/// A bijection onto [0, n): position p of the output sequence holds input
/// index indices[p].
class Permutation {
public:
    Permutation() = default;

    explicit Permutation(std::vector<std::size_t> indices) : idx_(std::move(indices)) {
        require(is_permutation_of(idx_, idx_.size()), "Permutation: indices are not a bijection onto [0, n)");
    }

    static Permutation identity(std::size_t n) {
        std::vector<std::size_t> v(n);
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = i;
        }
        return Permutation(std::move(v));
    }

    std::size_t size() const { return idx_.size(); }
    std::size_t operator[](std::size_t pos) const { return idx_[pos]; }
    const std::vector<std::size_t>& indices() const { return idx_; }
    auto begin() const { return idx_.begin(); }
    auto end() const { return idx_.end(); }

    // rank[i] = output position of input index i.
    std::vector<std::size_t> positions() const {
        std::vector<std::size_t> r(idx_.size());
        for (std::size_t p = 0; p < idx_.size(); ++p) {
            r[idx_[p]] = p;
        }
        return r;
    }

    Permutation reversed() const { return Permutation(std::vector<std::size_t>(idx_.rbegin(), idx_.rend())); }

    bool operator==(const Permutation& o) const { return idx_ == o.idx_; }
    bool operator!=(const Permutation& o) const { return !(*this == o); }

    std::string str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < idx_.size(); ++i) {
            s += (i ? "," : "") + std::to_string(idx_[i]);
        }
        return s + "]";
    }

private:
    std::vector<std::size_t> idx_;
};

}  // namespace set2seq
