#ifndef DRVOT_ERRORS_H
#define DRVOT_ERRORS_H

#include <stdexcept>
#include <string>

namespace drvot {

// Error categories map onto CLI exit codes: data -> 1, config -> 2, io -> 3.

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace drvot

#endif
