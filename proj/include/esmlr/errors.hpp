#pragma once

#include <stdexcept>
#include <string>

namespace esmlr {

/// Unreadable, malformed or inconsistent dataset files.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// A solve produced non-finite values or a solver invariant broke.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid experiment configuration (bad field values, impossible combinations).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace esmlr
