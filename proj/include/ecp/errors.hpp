#pragma once

#include <stdexcept>
#include <string>

namespace ecp {

// Exit-code mapping used by the CLI: ConfigError -> 2, DataError -> 3,
// InvariantError -> 4.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class InvariantError : public std::logic_error {
public:
    explicit InvariantError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace ecp
