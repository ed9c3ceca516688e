#pragma once

// Reverse-mode differentiation over dense matrices.
//
// A Tape records every operation of one forward pass as a node holding its
// value and a closure that pushes the node's gradient into its inputs.
// Parameters enter as reference nodes (no copy) and their gradients are
// accumulated into Parameter::grad when backward() runs. A tape built with
// record=false keeps only values, which is what evaluation uses.

#include <cmath>
#include <functional>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "set2seq/error.hpp"
#include "set2seq/numerics/matrix.hpp"
#include "set2seq/numerics/parameters.hpp"

namespace set2seq {

template <class T>
class Tape;

template <class T>
struct Var {
    Tape<T>* tape = nullptr;
    int id = -1;

    const Matrix<T>& value() const { return tape->value(*this); }
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    T scalar() const { return value()(0, 0); }
};

template <class T>
class Tape {
public:
    using M = Matrix<T>;
    using Backward = std::function<void(Tape&, int self)>;

    explicit Tape(bool record = true) : record_(record) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return record_; }
    std::size_t size() const { return nodes_.size(); }

    Var<T> constant(M value) { return push(std::move(value), false, nullptr); }

    Var<T> constant_scalar(T v) {
        M m(1, 1);
        m(0, 0) = v;
        return constant(std::move(m));
    }

    // Leaf that requires gradient but is not tied to a Parameter.
    Var<T> variable(M value) { return push(std::move(value), record_, nullptr); }

    Var<T> param(Parameter<T>& p) {
        Node n;
        n.ref = &p.value;
        n.sink = &p.grad;
        n.requires_grad = record_;
        nodes_.push_back(std::move(n));
        return {this, static_cast<int>(nodes_.size()) - 1};
    }

    const M& value(Var<T> v) const { return value(v.id); }
    const M& value(int id) const {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        return n.ref ? *n.ref : n.value;
    }

    bool requires_grad(Var<T> v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
    bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

    // Gradient buffer of a node, zero-allocated on first touch.
    M& grad(int id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.size() == 0) {
            const M& v = value(id);
            n.grad = M::Zero(v.rows(), v.cols());
        }
        return n.grad;
    }
    M& grad(Var<T> v) { return grad(v.id); }

    bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad.size() != 0; }

    // Record a new node. requires_grad=false nodes never run their closure.
    Var<T> push(M value, bool requires_grad, Backward fn) {
        Node n;
        n.value = std::move(value);
        n.requires_grad = record_ && requires_grad;
        if (n.requires_grad) {
            n.backward = std::move(fn);
        }
        nodes_.push_back(std::move(n));
        return {this, static_cast<int>(nodes_.size()) - 1};
    }

    /// Seeds d(loss)/d(loss) = seed and propagates to every reachable node.
    /// Parameter gradients are added into Parameter::grad (accumulating).
    void backward(Var<T> loss, T seed = T(1)) {
        require(record_, "Tape::backward on a non-recording tape");
        require(value(loss).rows() == 1 && value(loss).cols() == 1, "Tape::backward: loss must be 1x1");
        if (!requires_grad(loss)) {
            return;
        }
        grad(loss)(0, 0) += seed;
        for (int id = loss.id; id >= 0; --id) {
            Node& n = nodes_[static_cast<std::size_t>(id)];
            if (!n.requires_grad || n.grad.size() == 0) {
                continue;
            }
            if (n.backward) {
                n.backward(*this, id);
            }
            if (n.sink) {
                *n.sink += n.grad;
            }
        }
    }

private:
    struct Node {
        M value;
        M grad;
        const M* ref = nullptr;
        M* sink = nullptr;
        bool requires_grad = false;
        Backward backward;
    };

    bool record_;
    std::vector<Node> nodes_;
};

namespace ad {

namespace detail {

template <class T>
void check_same_shape(Var<T> a, Var<T> b, const char* op) {
    require(a.rows() == b.rows() && a.cols() == b.cols(),
            std::string(op) + ": shape mismatch " + shape_str(a.rows(), a.cols()) + " vs " +
                shape_str(b.rows(), b.cols()));
}

template <class T>
bool any_grad(std::initializer_list<Var<T>> vs) {
    for (auto v : vs) {
        if (v.tape->requires_grad(v)) {
            return true;
        }
    }
    return false;
}

}  // namespace detail

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
    detail::check_same_shape(a, b, "add");
    Tape<T>& t = *a.tape;
    return t.push(a.value() + b.value(), detail::any_grad({a, b}), [a = a.id, b = b.id](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        if (t.requires_grad(a)) t.grad(a) += g;
        if (t.requires_grad(b)) t.grad(b) += g;
    });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
    detail::check_same_shape(a, b, "sub");
    Tape<T>& t = *a.tape;
    return t.push(a.value() - b.value(), detail::any_grad({a, b}), [a = a.id, b = b.id](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        if (t.requires_grad(a)) t.grad(a) += g;
        if (t.requires_grad(b)) t.grad(b) -= g;
    });
}

// Elementwise product.
template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
    detail::check_same_shape(a, b, "mul");
    Tape<T>& t = *a.tape;
    return t.push(a.value().cwiseProduct(b.value()), detail::any_grad({a, b}),
                  [a = a.id, b = b.id](Tape<T>& t, int self) {
                      const auto& g = t.grad(self);
                      if (t.requires_grad(a)) t.grad(a) += g.cwiseProduct(t.value(b));
                      if (t.requires_grad(b)) t.grad(b) += g.cwiseProduct(t.value(a));
                  });
}

// Elementwise product with a constant matrix (masks, dropout keep-scales).
template <class T>
Var<T> mul_const(Var<T> a, Matrix<T> c) {
    require(a.rows() == c.rows() && a.cols() == c.cols(), "mul_const: shape mismatch");
    Tape<T>& t = *a.tape;
    Matrix<T> out = a.value().cwiseProduct(c);
    return t.push(std::move(out), detail::any_grad({a}), [a = a.id, c = std::move(c)](Tape<T>& t, int self) {
        t.grad(a) += t.grad(self).cwiseProduct(c);
    });
}

template <class T>
Var<T> scale(Var<T> a, T s) {
    Tape<T>& t = *a.tape;
    return t.push(a.value() * s, detail::any_grad({a}),
                  [a = a.id, s](Tape<T>& t, int self) { t.grad(a) += t.grad(self) * s; });
}

// a (r x c) + row (1 x c), broadcast over rows.
template <class T>
Var<T> add_row(Var<T> a, Var<T> row) {
    require(row.rows() == 1 && row.cols() == a.cols(),
            "add_row: expected 1x" + std::to_string(a.cols()) + " row, got " + shape_str(row.rows(), row.cols()));
    Tape<T>& t = *a.tape;
    Matrix<T> out = a.value().rowwise() + row.value().row(0);
    return t.push(std::move(out), detail::any_grad({a, row}), [a = a.id, r = row.id](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        if (t.requires_grad(a)) t.grad(a) += g;
        if (t.requires_grad(r)) t.grad(r) += g.colwise().sum();
    });
}

// a (r x c) * row (1 x c), broadcast over rows.
template <class T>
Var<T> mul_row(Var<T> a, Var<T> row) {
    require(row.rows() == 1 && row.cols() == a.cols(), "mul_row: shape mismatch");
    Tape<T>& t = *a.tape;
    Matrix<T> out = a.value().array().rowwise() * row.value().row(0).array();
    return t.push(std::move(out), detail::any_grad({a, row}), [a = a.id, r = row.id](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        if (t.requires_grad(a)) {
            t.grad(a).array() += g.array().rowwise() * t.value(r).row(0).array();
        }
        if (t.requires_grad(r)) {
            t.grad(r) += g.cwiseProduct(t.value(a)).colwise().sum();
        }
    });
}

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
    require(a.cols() == b.rows(),
            "matmul: inner dims differ " + shape_str(a.rows(), a.cols()) + " x " + shape_str(b.rows(), b.cols()));
    Tape<T>& t = *a.tape;
    Matrix<T> out(a.rows(), b.cols());
    out.noalias() = a.value() * b.value();
    return t.push(std::move(out), detail::any_grad({a, b}), [a = a.id, b = b.id](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        if (t.requires_grad(a)) t.grad(a).noalias() += g * t.value(b).transpose();
        if (t.requires_grad(b)) t.grad(b).noalias() += t.value(a).transpose() * g;
    });
}

// a * b^T
template <class T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
    require(a.cols() == b.cols(), "matmul_nt: widths differ");
    Tape<T>& t = *a.tape;
    Matrix<T> out(a.rows(), b.rows());
    out.noalias() = a.value() * b.value().transpose();
    return t.push(std::move(out), detail::any_grad({a, b}), [a = a.id, b = b.id](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        if (t.requires_grad(a)) t.grad(a).noalias() += g * t.value(b);
        if (t.requires_grad(b)) t.grad(b).noalias() += g.transpose() * t.value(a);
    });
}

template <class T>
Var<T> transpose(Var<T> a) {
    Tape<T>& t = *a.tape;
    return t.push(a.value().transpose(), detail::any_grad({a}),
                  [a = a.id](Tape<T>& t, int self) { t.grad(a) += t.grad(self).transpose(); });
}

template <class T>
Var<T> tanh(Var<T> a) {
    Tape<T>& t = *a.tape;
    Matrix<T> out = a.value().array().tanh().matrix();
    return t.push(std::move(out), detail::any_grad({a}), [a = a.id](Tape<T>& t, int self) {
        const auto& y = t.value(self);
        t.grad(a).array() += t.grad(self).array() * (T(1) - y.array().square());
    });
}

template <class T>
Var<T> sigmoid(Var<T> a) {
    Tape<T>& t = *a.tape;
    Matrix<T> out = a.value().unaryExpr([](T x) { return T(1) / (T(1) + std::exp(-x)); });
    return t.push(std::move(out), detail::any_grad({a}), [a = a.id](Tape<T>& t, int self) {
        const auto& y = t.value(self);
        t.grad(a).array() += t.grad(self).array() * y.array() * (T(1) - y.array());
    });
}

template <class T>
Var<T> relu(Var<T> a) {
    Tape<T>& t = *a.tape;
    Matrix<T> out = a.value().cwiseMax(T(0));
    return t.push(std::move(out), detail::any_grad({a}), [a = a.id](Tape<T>& t, int self) {
        const auto& x = t.value(a);
        t.grad(a).array() += (x.array() > T(0)).select(t.grad(self).array(), T(0));
    });
}

/// Row softmax over unmasked columns; masked entries are exactly 0.
template <class T>
Var<T> softmax_rows(Var<T> a, const Mask& col_mask) {
    Tape<T>& t = *a.tape;
    return t.push(masked_softmax_rows<T>(a.value(), col_mask), detail::any_grad({a}),
                  [a = a.id](Tape<T>& t, int self) {
                      const auto& y = t.value(self);
                      const auto& g = t.grad(self);
                      Eigen::Matrix<T, Eigen::Dynamic, 1> dot = g.cwiseProduct(y).rowwise().sum();
                      t.grad(a).array() += y.array() * (g.colwise() - dot).array();
                  });
}

/// Row log-softmax over unmasked columns. Masked entries are set to -inf in
/// value and receive no gradient.
template <class T>
Var<T> log_softmax_rows(Var<T> a, const Mask& col_mask) {
    Tape<T>& t = *a.tape;
    Matrix<T> p = masked_softmax_rows<T>(a.value(), col_mask);
    Matrix<T> out(p.rows(), p.cols());
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        T mx = -std::numeric_limits<T>::infinity();
        for (Eigen::Index c = 0; c < p.cols(); ++c) {
            if (col_mask[c]) mx = std::max(mx, a.value()(r, c));
        }
        T s = 0;
        for (Eigen::Index c = 0; c < p.cols(); ++c) {
            if (col_mask[c]) s += std::exp(a.value()(r, c) - mx);
        }
        const T lse = mx + std::log(s);
        for (Eigen::Index c = 0; c < p.cols(); ++c) {
            out(r, c) = col_mask[c] ? a.value()(r, c) - lse : -std::numeric_limits<T>::infinity();
        }
    }
    return t.push(std::move(out), detail::any_grad({a}), [a = a.id, p = std::move(p), col_mask](Tape<T>& t, int self) {
        Matrix<T> g = t.grad(self);
        for (Eigen::Index c = 0; c < g.cols(); ++c) {
            if (!col_mask[c]) g.col(c).setZero();
        }
        Eigen::Matrix<T, Eigen::Dynamic, 1> total = g.rowwise().sum();
        t.grad(a) += g - (p.array().colwise() * total.array()).matrix();
    });
}

template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    Tape<T>& t = *parts.front().tape;
    const Eigen::Index rows = parts.front().rows();
    Eigen::Index cols = 0;
    bool need = false;
    for (auto p : parts) {
        require(p.rows() == rows, "concat_cols: row counts differ");
        cols += p.cols();
        need = need || t.requires_grad(p);
    }
    Matrix<T> out(rows, cols);
    std::vector<std::pair<int, Eigen::Index>> spans;
    Eigen::Index off = 0;
    for (auto p : parts) {
        out.middleCols(off, p.cols()) = p.value();
        spans.emplace_back(p.id, off);
        off += p.cols();
    }
    return t.push(std::move(out), need, [spans = std::move(spans)](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        for (auto [id, o] : spans) {
            if (t.requires_grad(id)) t.grad(id) += g.middleCols(o, t.value(id).cols());
        }
    });
}

template <class T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
    require(!parts.empty(), "concat_rows: no inputs");
    Tape<T>& t = *parts.front().tape;
    const Eigen::Index cols = parts.front().cols();
    Eigen::Index rows = 0;
    bool need = false;
    for (auto p : parts) {
        require(p.cols() == cols, "concat_rows: widths differ");
        rows += p.rows();
        need = need || t.requires_grad(p);
    }
    Matrix<T> out(rows, cols);
    std::vector<std::pair<int, Eigen::Index>> spans;
    Eigen::Index off = 0;
    for (auto p : parts) {
        out.middleRows(off, p.rows()) = p.value();
        spans.emplace_back(p.id, off);
        off += p.rows();
    }
    return t.push(std::move(out), need, [spans = std::move(spans)](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        for (auto [id, o] : spans) {
            if (t.requires_grad(id)) t.grad(id) += g.middleRows(o, t.value(id).rows());
        }
    });
}

template <class T>
Var<T> slice_rows(Var<T> a, Eigen::Index r0, Eigen::Index n) {
    require(r0 >= 0 && n >= 0 && r0 + n <= a.rows(), "slice_rows: range out of bounds");
    Tape<T>& t = *a.tape;
    return t.push(a.value().middleRows(r0, n), detail::any_grad({a}), [a = a.id, r0, n](Tape<T>& t, int self) {
        t.grad(a).middleRows(r0, n) += t.grad(self);
    });
}

template <class T>
Var<T> slice_cols(Var<T> a, Eigen::Index c0, Eigen::Index n) {
    require(c0 >= 0 && n >= 0 && c0 + n <= a.cols(), "slice_cols: range out of bounds");
    Tape<T>& t = *a.tape;
    return t.push(a.value().middleCols(c0, n), detail::any_grad({a}), [a = a.id, c0, n](Tape<T>& t, int self) {
        t.grad(a).middleCols(c0, n) += t.grad(self);
    });
}

template <class T>
Var<T> gather_rows(Var<T> a, std::vector<Eigen::Index> idx) {
    Tape<T>& t = *a.tape;
    Matrix<T> out(static_cast<Eigen::Index>(idx.size()), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        require(idx[i] >= 0 && idx[i] < a.rows(), "gather_rows: index out of range");
        out.row(static_cast<Eigen::Index>(i)) = a.value().row(idx[i]);
    }
    return t.push(std::move(out), detail::any_grad({a}), [a = a.id, idx = std::move(idx)](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        auto& ga = t.grad(a);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            ga.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
        }
    });
}

// Row-major reinterpretation of the same values.
template <class T>
Var<T> reshape(Var<T> a, Eigen::Index rows, Eigen::Index cols) {
    require(rows * cols == a.rows() * a.cols(), "reshape: element count differs");
    Tape<T>& t = *a.tape;
    Matrix<T> out = Eigen::Map<const Matrix<T>>(a.value().data(), rows, cols);
    return t.push(std::move(out), detail::any_grad({a}), [a = a.id](Tape<T>& t, int self) {
        auto& ga = t.grad(a);
        const auto& g = t.grad(self);
        Eigen::Map<Matrix<T>>(ga.data(), g.rows(), g.cols()) += g;
    });
}

template <class T>
Var<T> sum(Var<T> a) {
    Tape<T>& t = *a.tape;
    Matrix<T> out(1, 1);
    out(0, 0) = a.value().sum();
    return t.push(std::move(out), detail::any_grad({a}),
                  [a = a.id](Tape<T>& t, int self) { t.grad(a).array() += t.grad(self)(0, 0); });
}

template <class T>
Var<T> mean(Var<T> a) {
    return scale(sum(a), T(1) / static_cast<T>(a.rows() * a.cols()));
}

// Sum of 1x1 values.
template <class T>
Var<T> sum_scalars(const std::vector<Var<T>>& xs) {
    require(!xs.empty(), "sum_scalars: no inputs");
    Tape<T>& t = *xs.front().tape;
    Matrix<T> out = Matrix<T>::Zero(1, 1);
    bool need = false;
    std::vector<int> ids;
    for (auto x : xs) {
        out(0, 0) += x.scalar();
        need = need || t.requires_grad(x);
        ids.push_back(x.id);
    }
    return t.push(std::move(out), need, [ids = std::move(ids)](Tape<T>& t, int self) {
        const T g = t.grad(self)(0, 0);
        for (int id : ids) {
            if (t.requires_grad(id)) t.grad(id)(0, 0) += g;
        }
    });
}

template <class T>
Var<T> pick(Var<T> a, Eigen::Index r, Eigen::Index c) {
    Tape<T>& t = *a.tape;
    Matrix<T> out(1, 1);
    out(0, 0) = a.value()(r, c);
    return t.push(std::move(out), detail::any_grad({a}),
                  [a = a.id, r, c](Tape<T>& t, int self) { t.grad(a)(r, c) += t.grad(self)(0, 0); });
}

/// Per-row normalisation to zero mean and unit variance (no affine part).
template <class T>
Var<T> layer_norm_rows(Var<T> a, T eps = T(1e-5)) {
    Tape<T>& t = *a.tape;
    const auto& x = a.value();
    const Eigen::Index d = x.cols();
    Matrix<T> y(x.rows(), d);
    Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const T mu = x.row(r).mean();
        const T var = (x.row(r).array() - mu).square().mean();
        inv_std(r) = T(1) / std::sqrt(var + eps);
        y.row(r) = (x.row(r).array() - mu) * inv_std(r);
    }
    return t.push(std::move(y), detail::any_grad({a}), [a = a.id, inv_std](Tape<T>& t, int self) {
        const auto& y = t.value(self);
        const auto& g = t.grad(self);
        auto& ga = t.grad(a);
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            const T mg = g.row(r).mean();
            const T mgy = g.row(r).cwiseProduct(y.row(r)).mean();
            ga.row(r).array() += inv_std(r) * (g.row(r).array() - mg - y.row(r).array() * mgy);
        }
    });
}

/// All ordered row pairs: out[j*n + k] = a[j] + b[k] for a, b of shape n x h.
template <class T>
Var<T> outer_add(Var<T> a, Var<T> b) {
    detail::check_same_shape(a, b, "outer_add");
    Tape<T>& t = *a.tape;
    const Eigen::Index n = a.rows();
    Matrix<T> out(n * n, a.cols());
    for (Eigen::Index j = 0; j < n; ++j) {
        out.middleRows(j * n, n) = b.value().rowwise() + a.value().row(j);
    }
    return t.push(std::move(out), detail::any_grad({a, b}), [a = a.id, b = b.id, n](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        const bool ga = t.requires_grad(a);
        const bool gb = t.requires_grad(b);
        for (Eigen::Index j = 0; j < n; ++j) {
            auto block = g.middleRows(j * n, n);
            if (ga) t.grad(a).row(j) += block.colwise().sum();
            if (gb) t.grad(b) += block;
        }
    });
}

/// Weighted reduction of pair rows: out[j] = sum_k c(j, k) * p[j*n + k],
/// with p of shape (n*n) x d and c of shape n x n.
template <class T>
Var<T> pair_aggregate(Var<T> p, Var<T> c) {
    const Eigen::Index n = c.rows();
    require(c.cols() == n && p.rows() == n * n, "pair_aggregate: expected (n*n) x d pairs and n x n weights");
    Tape<T>& t = *p.tape;
    Matrix<T> out(n, p.cols());
    for (Eigen::Index j = 0; j < n; ++j) {
        out.row(j).noalias() = c.value().row(j) * p.value().middleRows(j * n, n);
    }
    return t.push(std::move(out), detail::any_grad({p, c}), [p = p.id, c = c.id, n](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        const bool gp = t.requires_grad(p);
        const bool gc = t.requires_grad(c);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (gp) t.grad(p).middleRows(j * n, n).noalias() += t.value(c).row(j).transpose() * g.row(j);
            if (gc) t.grad(c).row(j).noalias() += g.row(j) * t.value(p).middleRows(j * n, n).transpose();
        }
    });
}

/// sum w * BCE(sigmoid(logits), labels), computed stably from logits.
template <class T>
Var<T> bce_with_logits(Var<T> logits, Matrix<T> labels, Matrix<T> weights) {
    require(labels.rows() == logits.rows() && labels.cols() == logits.cols() && weights.rows() == logits.rows() &&
                weights.cols() == logits.cols(),
            "bce_with_logits: shape mismatch");
    Tape<T>& t = *logits.tape;
    const auto& z = logits.value();
    Matrix<T> out = Matrix<T>::Zero(1, 1);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const T w = weights.data()[i];
        if (w == T(0)) continue;
        const T x = z.data()[i];
        const T softplus = std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
        out(0, 0) += w * (softplus - labels.data()[i] * x);
    }
    return t.push(std::move(out), detail::any_grad({logits}),
                  [l = logits.id, labels = std::move(labels), weights = std::move(weights)](Tape<T>& t, int self) {
                      const T g = t.grad(self)(0, 0);
                      const auto& z = t.value(l);
                      auto& gl = t.grad(l);
                      for (Eigen::Index i = 0; i < z.size(); ++i) {
                          const T w = weights.data()[i];
                          if (w == T(0)) continue;
                          const T s = T(1) / (T(1) + std::exp(-z.data()[i]));
                          gl.data()[i] += g * w * (s - labels.data()[i]);
                      }
                  });
}

}  // namespace ad
}  // namespace set2seq
