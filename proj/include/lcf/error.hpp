#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lcf {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed text input. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A size guard refused the request.
class CapExceeded : public Error {
public:
    CapExceeded(const std::string& limit_name, std::size_t limit, std::size_t requested)
        : Error(limit_name + " exceeded: requested " + std::to_string(requested) +
                ", limit " + std::to_string(limit)),
          limit_(limit) {}

    std::size_t limit() const noexcept { return limit_; }

private:
    std::size_t limit_;
};

} // namespace lcf
