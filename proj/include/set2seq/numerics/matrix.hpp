#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "set2seq/error.hpp"

namespace set2seq {

// Dense row-major matrix. Row-major so that reshape is a reinterpretation of
// the same buffer and row slices are contiguous.
template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per-row availability flags: 1 = present/unmasked, 0 = masked.
using Mask = std::vector<std::uint8_t>;

inline Mask full_mask(std::size_t n) { return Mask(n, 1); }

inline std::size_t count_set(const Mask& m) {
    std::size_t c = 0;
    for (auto v : m) {
        c += v != 0;
    }
    return c;
}

template <class T>
bool all_finite(const Matrix<T>& m) {
    return m.allFinite();
}

inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
    return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
}

/// Row-wise softmax restricted to unmasked columns.
///
/// `col_mask` applies the same column mask to every row (length = cols).
/// Masked entries come out exactly 0. Each row is stabilised by subtracting
/// its maximum over unmasked entries. Throws if every column is masked.
template <class T>
Matrix<T> masked_softmax_rows(const Matrix<T>& m, const Mask& col_mask) {
    require(col_mask.size() == static_cast<std::size_t>(m.cols()),
            "masked_softmax_rows: mask length " + std::to_string(col_mask.size()) +
                " does not match cols " + std::to_string(m.cols()));
    require(count_set(col_mask) > 0, "masked_softmax_rows: fully masked row (empty candidate set)");
    Matrix<T> out(m.rows(), m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        T mx = -std::numeric_limits<T>::infinity();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (col_mask[c] && m(r, c) > mx) {
                mx = m(r, c);
            }
        }
        T sum = 0;
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (col_mask[c]) {
                const T e = std::exp(m(r, c) - mx);
                out(r, c) = e;
                sum += e;
            } else {
                out(r, c) = 0;
            }
        }
        out.row(r) /= sum;
    }
    return out;
}

/// Full boolean-matrix variant: `mask(r, c) != 0` marks an unmasked entry.
template <class T>
Matrix<T> masked_softmax_rows(const Matrix<T>& m, const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& mask) {
    require(mask.rows() == m.rows() && mask.cols() == m.cols(),
            "masked_softmax_rows: mask shape " + shape_str(mask.rows(), mask.cols()) +
                " does not match " + shape_str(m.rows(), m.cols()));
    Matrix<T> out(m.rows(), m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Mask row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row[c] = mask(r, c);
        }
        out.row(r) = masked_softmax_rows<T>(Matrix<T>(m.row(r)), row);
    }
    return out;
}

}  // namespace set2seq
