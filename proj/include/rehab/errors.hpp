#pragma once

#include <stdexcept>
#include <string>

namespace rehab {

// Unreadable/unwritable files.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input content (carries a line number when known).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg, long line = -1)
        : std::runtime_error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
          line_number(line) {}
    long line_number;
};

// Bad configuration values.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Valid input that cannot be processed (insufficient data, unknown ids, ...).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace rehab
