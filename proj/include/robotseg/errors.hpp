#pragma once

#include <stdexcept>
#include <string>

namespace robotseg {

// Shape or size mismatch between tensors/images.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid knob value (kernel size, threshold ordering, unknown config key...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller broke a documented precondition (empty input, scalar expected...).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// File missing, unreadable, or malformed.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace robotseg
