#pragma once

#include <cstdint>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "set2seq/metrics/metrics.hpp"

namespace set2seq {

/// Metric summaries for one task. Within a single run `count` is the
/// number of instances; after aggregate_runs it is the number of runs.
struct EvalReport {
    std::string task;
    std::string config_hash;
    std::map<std::string, Summary> metrics;

    double mean(const std::string& m) const {
        auto it = metrics.find(m);
        require(it != metrics.end(), "report has no metric '" + m + "'");
        return it->second.mean;
    }
};

/// Mean and sample std over run-level means.
inline EvalReport aggregate_runs(const std::vector<EvalReport>& runs) {
    require(!runs.empty(), "aggregate_runs: no runs");
    EvalReport out;
    out.task = runs.front().task;
    out.config_hash = runs.front().config_hash;
    for (const auto& [name, _] : runs.front().metrics) {
        std::vector<double> xs;
        for (const auto& r : runs) xs.push_back(r.mean(name));
        out.metrics[name] = summarize(xs);
    }
    return out;
}

inline std::string format_number(double x) {
    std::ostringstream os;
    os << std::setprecision(10) << x;
    return os.str();
}

inline std::string pm(const Summary& s, int digits = 2) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << s.mean << " ± " << s.std;
    return os.str();
}

inline const char* kReportCsvHeader = "task,metric,mean,std,count,config_hash";

inline void write_report_csv(const std::vector<EvalReport>& reports, std::ostream& os, bool header = true) {
    if (header) os << kReportCsvHeader << '\n';
    for (const auto& r : reports)
        for (const auto& [name, s] : r.metrics)
            os << r.task << ',' << name << ',' << format_number(s.mean) << ',' << format_number(s.std) << ',' << s.count << ','
               << r.config_hash << '\n';
}

inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [name, s] : r.metrics) m[name] = {{"mean", s.mean}, {"std", s.std}, {"count", s.count}};
    return {{"task", r.task}, {"config_hash", r.config_hash}, {"metrics", m}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport r;
    r.task = j.at("task").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& [name, s] : j.at("metrics").items())
        r.metrics[name] = Summary{s.at("mean").get<double>(), s.at("std").get<double>(), s.at("count").get<std::size_t>()};
    return r;
}

}  // namespace set2seq
