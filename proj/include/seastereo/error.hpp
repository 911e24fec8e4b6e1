#pragma once

#include <stdexcept>
#include <string>

namespace seastereo {

// Error categories; the CLI maps each to a distinct exit code.
enum class ErrorCode : int {
    Usage = 2,      // bad arguments / unknown subcommand
    Config = 3,     // unreadable or invalid configuration
    Io = 4,         // missing paths, unreadable/unwritable files
    Data = 5,       // violated data contract (bad maps, malformed formats)
    Internal = 6,   // shape mismatches, programming-level contract breaks
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg)
        : std::runtime_error(msg), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& msg) {
    throw Error(code, msg);
}

}  // namespace seastereo
