#pragma once
#include <stdexcept>
#include <string>

namespace hdselect {

// Bad input: malformed data, invalid model spec, option misuse. CLI exit 1.
class UserError : public std::runtime_error {
public:
    explicit UserError(const std::string& what) : std::runtime_error(what) {}
};

// Estimation failure on valid input: singular systems, no surviving
// instruments, NaN propagation. CLI exit 2.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hdselect
