#pragma once

#include <stdexcept>
#include <string>

namespace cmf {

// Process exit codes shared by the CLI and the error hierarchy.
enum class ExitCode : int {
    ok = 0,
    usage = 2,       // bad flags, bad config, bad parameters
    data = 3,        // dataset parse/validation, split construction
    numeric = 4,     // non-finite loss, domain errors in metrics
};

class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ExitCode::usage, "config error: " + w) {}
};

struct ParameterError : Error {
    explicit ParameterError(const std::string& w) : Error(ExitCode::usage, "parameter error: " + w) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& w) : Error(ExitCode::usage, "shape error: " + w) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& w) : Error(ExitCode::data, "parse error: " + w) {}
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& w) : Error(ExitCode::data, "validation error: " + w) {}
};

struct SplitError : Error {
    explicit SplitError(const std::string& w) : Error(ExitCode::data, "split error: " + w) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& w) : Error(ExitCode::numeric, "domain error: " + w) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& w) : Error(ExitCode::numeric, "numeric error: " + w) {}
};

}  // namespace cmf
