#pragma once

#include <stdexcept>
#include <string>

namespace cbsa {

// Shape/dimension disagreement between operands.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input outside an operation's documented domain (log of non-positive,
// negative pow base, degenerate row for normalization, ...).
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// API contract violation (non-scalar backward root, step index out of range).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed CBSF payload or other serialized data; message names the byte offset.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration or dataset spec.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure (eigensolver non-convergence, non-finite loss).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cbsa
