#pragma once

#include <stdexcept>
#include <string>

namespace safear {

/// A state, schema definition, or schema reference violates its invariants.
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

/// A configuration, model, policy, or instances file is invalid or inconsistent.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Raw dataset input could not be parsed or is unusable.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// An exhaustive computation was refused because the problem exceeds its size limits.
class RefusalError : public std::invalid_argument {
 public:
  explicit RefusalError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace safear
