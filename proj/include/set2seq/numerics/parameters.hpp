#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "set2seq/error.hpp"
#include "set2seq/numerics/matrix.hpp"
#include "set2seq/numerics/rng.hpp"

namespace set2seq {

enum class InitKind {
    glorot,  // uniform(-a, a), a = sqrt(6 / (fan_in + fan_out))
    zeros,   // biases, and anything that must start neutral
    ones,    // layer-norm gains
};

template <class T>
struct Parameter {
    std::string name;
    Matrix<T> value;
    Matrix<T> grad;  // always value's shape
};

/// Glorot-uniform (or constant) initialisation. fan_in = rows, fan_out = cols.
template <class T>
Parameter<T> init_param(std::string name, Eigen::Index rows, Eigen::Index cols, SeededRng& rng,
                        InitKind kind = InitKind::glorot) {
    require(rows >= 1 && cols >= 1, "init_param: shape dims must be >= 1 for " + name);
    Parameter<T> p{std::move(name), Matrix<T>(rows, cols), Matrix<T>::Zero(rows, cols)};
    switch (kind) {
    case InitKind::zeros:
        p.value.setZero();
        break;
    case InitKind::ones:
        p.value.setOnes();
        break;
    case InitKind::glorot: {
        const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
        for (Eigen::Index i = 0; i < p.value.size(); ++i) {
            p.value.data()[i] = static_cast<T>(rng.uniform(-a, a));
        }
        break;
    }
    }
    return p;
}

/// Every learned weight of a model, addressable by index or by name.
/// Indices are stable for the lifetime of the store; copying a store copies
/// all values and gradients.
template <class T>
class ParameterStore {
public:
    std::size_t add(Parameter<T> p) {
        require(!index_.count(p.name), "ParameterStore: duplicate parameter name " + p.name);
        index_.emplace(p.name, params_.size());
        params_.push_back(std::move(p));
        return params_.size() - 1;
    }

    std::size_t size() const { return params_.size(); }
    Parameter<T>& operator[](std::size_t i) { return params_[i]; }
    const Parameter<T>& operator[](std::size_t i) const { return params_[i]; }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t index_of(const std::string& name) const {
        auto it = index_.find(name);
        require(it != index_.end(), "ParameterStore: no parameter named " + name);
        return it->second;
    }

    Parameter<T>& at(const std::string& name) { return params_[index_of(name)]; }
    const Parameter<T>& at(const std::string& name) const { return params_[index_of(name)]; }

    void zero_grads() {
        for (auto& p : params_) {
            p.grad.setZero();
        }
    }

    std::size_t num_values() const {
        std::size_t n = 0;
        for (const auto& p : params_) {
            n += static_cast<std::size_t>(p.value.size());
        }
        return n;
    }

    double grad_norm() const {
        double s = 0;
        for (const auto& p : params_) {
            s += p.grad.template cast<double>().squaredNorm();
        }
        return std::sqrt(s);
    }

    // Rescales gradients so that their global L2 norm is at most max_norm.
    // Returns the norm before clipping.
    double clip_grad_norm(double max_norm) {
        const double norm = grad_norm();
        if (max_norm > 0 && norm > max_norm) {
            const T f = static_cast<T>(max_norm / norm);
            for (auto& p : params_) {
                p.grad *= f;
            }
        }
        return norm;
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::vector<Parameter<T>> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace set2seq
