#pragma once

#include <stdexcept>
#include <string>

namespace bdf {

/// Shape or axis mismatch between tensors. Message names the offending axes.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Argument outside its valid domain (e.g. class label out of range).
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed file. Message names the byte offset where parsing failed.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Evaluation over an empty or fully-excluded sample set.
struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Training diverged. Message names the epoch and batch.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A numeric operation produced a NaN or infinity.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace bdf
