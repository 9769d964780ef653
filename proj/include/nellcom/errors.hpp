#pragma once

#include <stdexcept>
#include <string>

namespace nellcom {

// Error families map 1:1 onto CLI exit codes (see tools/nellcom_main.cpp):
// ConfigError -> 2, DataError -> 3, CheckpointError -> 4.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace nellcom
