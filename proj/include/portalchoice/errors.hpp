#pragma once

#include <stdexcept>
#include <string>

namespace portalchoice {

// Bad flags, specs, catalogs, parameter ranges. CLI exit code 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input data (malformed files, out-of-coverage dates, non-finite
// features). CLI exit code 1.
class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Structurally empty or degenerate problem instances. CLI exit code 1.
class domain_error : public std::runtime_error {
public:
    explicit domain_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace portalchoice
