#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace foldkit {

// Error taxonomy. Every throwing path in the library uses one of these so
// callers (CLI, tests) can map failures to exit codes and messages.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration value or range (names the offending field).
struct ConfigError : Error {
    using Error::Error;
};

// Bad argument to an operation (even window size, sigma <= 0, ...).
struct ArgumentError : Error {
    using Error::Error;
};

// Tensor shape mismatch; message names both shapes.
struct ShapeError : Error {
    using Error::Error;
};

// Point behind camera, ray parallel to plane, collinear corners, ...
struct GeometryError : Error {
    using Error::Error;
};

// Scene cannot be rendered (scene center behind camera).
struct RenderError : Error {
    using Error::Error;
};

// File missing, malformed JSON, annotation out of bounds.
struct IoError : Error {
    using Error::Error;
};

// Training aborted (non-finite loss); message carries epoch and batch.
struct TrainError : Error {
    using Error::Error;
};

}  // namespace foldkit
