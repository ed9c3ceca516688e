#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "set2seq/numerics/matrix.hpp"
#include "set2seq/permutation.hpp"

namespace set2seq {

using Json = nlohmann::json;

/// One set with its optional ordering. Elements are stored in double and
/// cast to the model precision at batching time.
struct Instance {
    Matrix<double> elements;  // n x d_raw
    std::optional<Permutation> target;
    std::string task;  // "tsp", "grammar:<kind>", "ruleset", "embedded"
    Json meta = Json::object();

    std::size_t size() const { return static_cast<std::size_t>(elements.rows()); }
    Eigen::Index dim() const { return elements.cols(); }

    void validate() const {
        require(elements.rows() >= 1, "instance: empty set");
        if (target) {
            require(target->size() == size(), "instance: target length " + std::to_string(target->size()) +
                                                  " != cardinality " + std::to_string(size()));
        }
    }

    bool operator==(const Instance& o) const {
        return elements.rows() == o.elements.rows() && elements.cols() == o.elements.cols() && elements == o.elements &&
               target == o.target && task == o.task && meta == o.meta;
    }
};

using Dataset = std::vector<Instance>;

inline Eigen::Index dataset_dim(const Dataset& d) { return d.empty() ? 0 : d.front().dim(); }

}  // namespace set2seq
