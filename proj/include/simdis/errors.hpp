#pragma once

#include <stdexcept>
#include <string>

namespace simdis {

// Inconsistent or invalid configuration (mismatched universes, bad hyper-parameters).
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Input outside an operation's mathematical domain (empty label sets, empty classes).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Non-finite values produced during training or loss evaluation.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace simdis
