#pragma once

#include <stdexcept>
#include <string>

namespace tse {

/// Invalid configuration, schema violation, or inconsistent inputs.
/// CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure at runtime: solver blow-up, non-finite loss,
/// undefined metric. CLI maps this to exit code 2.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace tse
