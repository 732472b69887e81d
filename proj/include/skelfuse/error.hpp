#pragma once

#include <stdexcept>
#include <string>

namespace skelfuse {

// Error taxonomy mirrors the CLI exit codes: DataError -> 2,
// TrainError -> 3, CacheError -> 4. Usage errors are handled by the
// argument parser and map to 1.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class TrainError : public std::runtime_error {
 public:
  explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

class CacheError : public std::runtime_error {
 public:
  explicit CacheError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace skelfuse
