#pragma once

#include <stdexcept>
#include <string>

namespace nesoc {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised by the text front ends (formulas, config files, CSV).
/// Carries a position so callers can point at the offending input.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t position)
        : Error(what), position_(position) {}

    /// Byte offset for single-line inputs, 1-based line number for files.
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

} // namespace nesoc
