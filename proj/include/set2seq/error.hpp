#pragma once

#include <stdexcept>
#include <string>

namespace set2seq {

// Raised for contract violations on public operations (bad shapes, empty
// candidate sets, malformed files). Messages are single-line diagnostics.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) {
        throw Error(msg);
    }
}

}  // namespace set2seq
