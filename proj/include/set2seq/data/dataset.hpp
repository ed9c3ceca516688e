#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "set2seq/data/instance.hpp"
#include "set2seq/error.hpp"

namespace set2seq {

inline Json instance_to_json(const Instance& inst) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < inst.elements.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < inst.elements.cols(); ++c) row.push_back(inst.elements(r, c));
        rows.push_back(std::move(row));
    }
    Json j = {{"elements", std::move(rows)}, {"task", inst.task}, {"meta", inst.meta}};
    j["target"] = inst.target ? Json(inst.target->indices()) : Json(nullptr);
    return j;
}

inline Instance instance_from_json(const Json& j) {
    Instance inst;
    const auto& rows = j.at("elements");
    require(rows.is_array() && !rows.empty(), "\"elements\" must be a non-empty array");
    const std::size_t d = rows.at(0).size();
    inst.elements.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        require(rows[r].is_array() && rows[r].size() == d, "row " + std::to_string(r) + " has inconsistent width");
        for (std::size_t c = 0; c < d; ++c)
            inst.elements(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
    }
    if (j.contains("target") && !j["target"].is_null()) inst.target = Permutation(j["target"].get<std::vector<std::size_t>>());
    inst.task = j.value("task", std::string("embedded"));
    inst.meta = j.value("meta", Json::object());
    inst.validate();
    return inst;
}

inline void write_dataset(const Dataset& ds, std::ostream& os) {
    for (const auto& inst : ds) os << instance_to_json(inst).dump() << '\n';
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream os(path);
    require(static_cast<bool>(os), "cannot write dataset '" + path + "'");
    write_dataset(ds, os);
    require(static_cast<bool>(os), "write failed for dataset '" + path + "'");
}

inline Dataset read_dataset(std::istream& is, const std::string& name = "<stream>") {
    Dataset ds;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = name + ":" + std::to_string(lineno);
        Instance inst;
        try {
            inst = instance_from_json(Json::parse(line));
        } catch (const Json::exception& e) {
            throw Error(where + ": malformed record: " + e.what());
        } catch (const Error& e) {
            throw Error(where + ": " + e.what());
        }
        if (!ds.empty() && inst.dim() != ds.front().dim()) {
            throw Error(where + ": element width " + std::to_string(inst.dim()) + " differs from " +
                        std::to_string(ds.front().dim()) + " on earlier lines");
        }
        ds.push_back(std::move(inst));
    }
    return ds;
}

inline Dataset load_dataset(const std::string& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), "cannot open dataset '" + path + "'");
    return read_dataset(is, path);
}

/// Precomputed-embedding sets (one embedding per sentence or item). Every
/// record needs a target; cardinality may vary.
inline Dataset load_embedded(const std::string& path) {
    auto ds = load_dataset(path);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        require(ds[i].target.has_value(), path + ": record " + std::to_string(i + 1) + " has no target");
        ds[i].task = "embedded";
    }
    return ds;
}

}  // namespace set2seq
