#ifndef HOLOGEN_ERRORS_HPP
#define HOLOGEN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace hologen {

/// Bad or infeasible scenario parameters (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent input data (CLI exit code 3).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace hologen

#endif
