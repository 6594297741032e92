#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace eadf {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Vector lengths disagree, or a dimension is zero.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An argument lies outside the mathematical domain of the operation
/// (non-positive weight under the entropy cost, p outside [0,1], ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or request payload.
class ValidationError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// The requested state transition already happened (e.g. duplicate feedback).
class ConflictError : public Error {
public:
    using Error::Error;
};

/// Unsupported or truncated binary file (images, masks).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Malformed input file; carries the 1-based line number where parsing failed.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace eadf
