#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stochlog {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Syntax error in grammar or term text, with a 1-based source position.
class ParseError : public Error {
public:
    ParseError(const std::string &message, std::size_t line, std::size_t column)
        : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
          line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Well-formed syntax that violates a program-level constraint.
class ProgramError : public Error {
public:
    using Error::Error;
};

/// Failure while evaluating a `{...}` goal or a builtin.
class EvalError : public Error {
public:
    using Error::Error;
};

class ModelError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

} // namespace stochlog
