#pragma once

#include <stdexcept>
#include <string>

namespace vfl {

/// Malformed or inconsistent input data (bad file, bad CSV row, bad header).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

/// Caller violated a precondition of the API.
class UsageError : public std::invalid_argument {
public:
    explicit UsageError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace vfl
