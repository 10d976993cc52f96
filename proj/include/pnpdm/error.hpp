#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pnpdm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad dims, out-of-domain value, ...).
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// A computation produced a non-finite or otherwise unusable result.
class NumericFailure : public Error {
public:
    using Error::Error;
};

/// Integration of the reverse-time SDE left the finite range.
class Diverged : public NumericFailure {
public:
    Diverged(std::size_t step, const std::string& what)
        : NumericFailure("diverged at step " + std::to_string(step) + ": " + what), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

} // namespace pnpdm
