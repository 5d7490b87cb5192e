#pragma once

#include <stdexcept>
#include <string>

namespace ccs {

// Error taxonomy used across the library. The CLI maps these onto process
// exit codes (usage=1, data/format=2, numeric=3).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad caller-supplied value (empty anchor set, k > N, lo >= hi, ...).
struct ArgumentError : Error {
    using Error::Error;
};

// Out-of-range output/class index.
struct IndexError : Error {
    using Error::Error;
};

// Vector/matrix dimensions do not line up.
struct ShapeError : Error {
    using Error::Error;
};

// Malformed or truncated file contents (bad magic, short read, ...).
struct FormatError : Error {
    using Error::Error;
};

// Filesystem-level failure (unreadable/unwritable path).
struct IoError : Error {
    using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
    using Error::Error;
};

}  // namespace ccs
