#pragma once

#include <stdexcept>
#include <string>

namespace eav {

// Shape/rank mismatches between tensors or declared layouts.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Out-of-range scalar parameters (scales, step indices, repetition counts).
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent configuration (unknown strategy, bad config file).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Trace records that do not refer to the same (step, layer, F) coordinates.
struct PairingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace eav
