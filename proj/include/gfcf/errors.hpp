#pragma once

#include <stdexcept>
#include <string>

namespace gfcf {

/// File or parse problem (missing path, malformed token, bad magic).
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

/// Contract violation on inputs: out-of-range ids, dimension mismatches,
/// parameters outside their declared ranges.
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite value detected where finite arithmetic is required.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace gfcf
