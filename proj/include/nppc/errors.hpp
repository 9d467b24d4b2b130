#pragma once

#include <stdexcept>
#include <string>

namespace nppc {

/// Bad command-line input or an inconsistent run manifest (exit code 2).
class UsageError : public std::invalid_argument {
 public:
  explicit UsageError(const std::string& what) : std::invalid_argument(what) {}
};

/// Input data failed validation (exit code 3).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nppc
