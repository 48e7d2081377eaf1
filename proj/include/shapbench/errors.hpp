#pragma once

#include <stdexcept>
#include <string>

namespace shapbench {

// Invalid user-supplied configuration (bad flag values, impossible budgets).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file (CSV cell, monks row, JSON schema).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Shape mismatch between numeric objects; message names both dimensions.
struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Non-finite loss or gradient encountered during optimization.
struct TrainingDiverged : std::runtime_error {
    explicit TrainingDiverged(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace shapbench
