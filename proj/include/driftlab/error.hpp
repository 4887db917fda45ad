#pragma once

#include <stdexcept>
#include <string>

namespace driftlab {

enum class ErrorKind {
    Format,
    Parse,
    DuplicateId,
    Alignment,
    Domain,
    Vocabulary,
    Parameter,
    Schema,
    Solver,
    UndefinedMetric,
    Pairing,
    Setting,
    Config,
    Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Parse errors carry the 1-based line number of the offending line.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

}  // namespace driftlab
