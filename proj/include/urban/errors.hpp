#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace urban {

// Input text could not be parsed. `byte_offset` points at (or near) the
// offending byte of the source document.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t byte_offset)
        : std::runtime_error(what), byte_offset_(byte_offset) {}

    std::size_t byte_offset() const { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

// A value is outside the domain an operation is defined on
// (coordinates beyond the projection's validity band, empty inputs, ...).
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// A binary or structured payload violates its format contract; the message
// names the offending field.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Configuration rejected before any stage runs.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A required input artifact is absent. Maps to exit code 2 in the CLI.
class MissingInputError : public std::runtime_error {
public:
    explicit MissingInputError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace urban
