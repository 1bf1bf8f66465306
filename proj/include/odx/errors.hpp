#pragma once

#include <stdexcept>
#include <string>

namespace odx {

// Error categories map 1:1 onto the CLI exit codes and C API status codes.
enum class ErrorCode : int {
    config = 2,   // malformed request, bad parameters, unknown keys
    data = 3,     // unreadable or inconsistent input files
    numeric = 4,  // divergence, non-finite values
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorCode::config, what) {}
};

struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorCode::data, what) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error(ErrorCode::numeric, what) {}
};

}  // namespace odx
