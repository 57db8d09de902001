#pragma once

#include <stdexcept>
#include <string>

namespace lienet {

// Category bases. The CLI maps them to exit codes: config=2, data=3, numeric=4.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- numeric ---

/// Rotation angle within delta of pi; the two-argument log/axis formulas lose
/// their sin(theta) denominator there. Callers choose the fallback.
struct NearPiSingularity : NumericError {
    using NumericError::NumericError;
};

/// Rank-deficient input to the nearest-rotation projection.
struct DegenerateMatrix : NumericError {
    using NumericError::NumericError;
};

/// NaN/inf in a gradient bundle; carries the layer index that produced it.
struct NonFiniteGradient : NumericError {
    explicit NonFiniteGradient(int layer_index, const std::string& what)
        : NumericError(what), layer(layer_index) {}
    int layer;
};

// --- data ---

/// Bone shorter than the length floor; feature extraction substitutes identity.
struct DegenerateBone : DataError {
    using DataError::DataError;
};

struct MalformedFile : DataError {
    using DataError::DataError;
};

struct InconsistentJointCount : DataError {
    using DataError::DataError;
};

struct UnknownLabel : DataError {
    using DataError::DataError;
};

struct EmptyDataset : DataError {
    using DataError::DataError;
};

struct GeometryMismatch : DataError {
    using DataError::DataError;
};

struct ShapeMismatch : DataError {
    using DataError::DataError;
};

struct OddChannelCount : DataError {
    using DataError::DataError;
};

/// Pooling backward called with records that do not match the upstream shape.
struct StaleRecords : DataError {
    using DataError::DataError;
};

struct LabelOutOfRange : DataError {
    using DataError::DataError;
};

// --- config ---

struct InvalidSpec : ConfigError {
    using ConfigError::ConfigError;
};

}  // namespace lienet
