#pragma once

#include <stdexcept>
#include <string>

namespace selab {

/// Operand shapes disagree (matrix sizes, signal lengths, chunk layout).
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A value violates an operation's precondition.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// NaN or infinity where a finite number is required.
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unsupported file contents (WAV, checkpoint, manifest).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace selab
