#pragma once

#include <stdexcept>
#include <string>

namespace statsformer {

/// Process exit codes shared by every CLI command.
enum class ExitCode : int {
    ok = 0,
    usage = 1,
    data = 2,
    numeric = 3,
    network = 4,
};

class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

/// Bad flags, bad config keys, missing credentials.
class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(ExitCode::usage, what) {}
};

/// Malformed or inconsistent input data (CSV, scores files, archives).
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ExitCode::data, what) {}
};

/// Solver non-convergence, unreachable targets, degenerate numerics.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ExitCode::numeric, what) {}
};

/// Transport, HTTP status, and retry-exhaustion failures from the score client.
class NetworkError : public Error {
public:
    explicit NetworkError(const std::string& what) : Error(ExitCode::network, what) {}
};

}  // namespace statsformer
