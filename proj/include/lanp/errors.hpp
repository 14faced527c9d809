#pragma once
#include <stdexcept>
#include <string>

namespace lanp {

// Error taxonomy used across the library. CLI maps these to exit codes:
// ConfigError -> 2, DataError -> 3, NumericError and contract errors -> 4.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct KeyError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

// Non-finite value encountered in a forward/backward pass or optimizer step.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace lanp
