#pragma once

#include <stdexcept>
#include <string>

namespace avp {

// Error classes map to distinct CLI exit codes.
enum class ErrorKind {
    Usage = 2,     // bad arguments / unknown preset
    Io = 3,        // missing or unreadable files
    Format = 4,    // malformed file contents / shape mismatch
    Domain = 5,    // degenerate geometry, empty atlas, invalid texel
    Numeric = 6,   // non-finite values
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }
    int exit_code() const { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

}  // namespace avp
