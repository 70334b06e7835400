#pragma once

#include <stdexcept>
#include <string>

namespace fedsim {

// Structural mismatch: incompatible block shapes, split indices, partitions.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or truncated file content.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// A sampling request exceeds the available population.
struct CapacityError : std::runtime_error {
    explicit CapacityError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fedsim
