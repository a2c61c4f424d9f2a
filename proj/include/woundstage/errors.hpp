#pragma once

#include <stdexcept>
#include <string>

namespace woundstage {

// Exit codes used by the command line tool. Library code throws the matching
// exception type and the tool maps it at the top level.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitData = 2,
    kExitNumeric = 3,
};

// Caller passed arguments that can never work (bad flag combination, bad
// enum name, out-of-range index).
class UsageError : public std::runtime_error {
  public:
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input data is malformed or inconsistent (unreadable file, bad manifest row,
// shape mismatch between data and model).
class DataError : public std::runtime_error {
  public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// A computation produced something unusable (non-finite values, degenerate
// statistics, divergence).
class NumericError : public std::runtime_error {
  public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/layer shape violations. A kind of usage error: the caller wired
// incompatible shapes together.
class DimensionError : public UsageError {
  public:
    explicit DimensionError(const std::string& msg) : UsageError(msg) {}
};

}  // namespace woundstage
