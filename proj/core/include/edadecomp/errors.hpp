#pragma once

#include <stdexcept>
#include <string>

namespace edadecomp {

// Invalid configuration: bad filter cutoff, even pooling kernel, unknown keys.
class ConfigError : public std::invalid_argument {
public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Input data violates a contract (non-finite samples, too few samples, ...).
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// A synthetic scenario specification that cannot be realised.
class SpecError : public std::invalid_argument {
public:
  explicit SpecError(const std::string& what) : std::invalid_argument(what) {}
};

// Non-finite values produced inside a numerical routine.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Broken internal invariant (e.g. a malformed autodiff graph).
class InternalError : public std::logic_error {
public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

} // namespace edadecomp
