#ifndef HPDNET_ERRORS_HPP
#define HPDNET_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hpdnet {

// Base class for every error thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input matrix contains NaN/Inf or is structurally unusable.
struct InvalidMatrix : Error {
    using Error::Error;
};

// A matrix required to be HPD has an eigenvalue at or below the floor.
struct NotPositiveDefinite : Error {
    using Error::Error;
};

// An operation received an empty collection.
struct EmptyInput : Error {
    using Error::Error;
};

// A mapping kernel is rank deficient (smallest singular value too small).
struct DegenerateKernel : Error {
    using Error::Error;
};

// A class ended up with too few samples for covariance estimation.
struct InsufficientSamples : Error {
    InsufficientSamples(int class_id, const std::string& msg)
        : Error(msg), class_id(class_id) {}
    int class_id;
};

// A label map contains no labeled pixels (or fewer than two classes).
struct NoLabels : Error {
    using Error::Error;
};

// Dimension mismatch between tensors, fields or maps.
struct ShapeError : Error {
    using Error::Error;
};

// Malformed file. Carries the byte offset where parsing failed.
struct FormatError : Error {
    FormatError(const std::string& msg, std::size_t byte_offset)
        : Error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
          byte_offset(byte_offset) {}
    explicit FormatError(const std::string& msg) : Error(msg), byte_offset(0) {}
    std::size_t byte_offset;
};

// Training loss became non-finite.
struct DivergedLoss : Error {
    using Error::Error;
};

// Bad key/value in a config or scene spec file. Carries the line number.
struct ConfigError : Error {
    ConfigError(const std::string& msg, int line)
        : Error(msg + " (line " + std::to_string(line) + ")"), line(line) {}
    explicit ConfigError(const std::string& msg) : Error(msg), line(0) {}
    int line;
};

// Filesystem failure while reading or writing an artifact.
struct IoError : Error {
    using Error::Error;
};

}  // namespace hpdnet

#endif  // HPDNET_ERRORS_HPP
