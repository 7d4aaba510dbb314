#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace des {

/// Raised when an operation receives arguments that violate its preconditions
/// (shape mismatch, empty reduction, out-of-range label, ...).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised by file and document readers. Carries the byte offset and, where the
/// format is line oriented, the 1-based line of the failure.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset, std::size_t line = 0)
        : std::runtime_error(what), offset_(offset), line_(line) {}

    std::size_t offset() const noexcept { return offset_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t offset_;
    std::size_t line_;
};

/// Inconsistent network or training configuration. `field()` names the culprit.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// A forward or backward value turned non-finite during training.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace des
