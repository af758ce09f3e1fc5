#pragma once

#include <stdexcept>
#include <string>

namespace sharedctl {

// Value outside the domain of a type or operation.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or unexpected wire traffic.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Well-formed JSON that does not match the state schema.
class SchemaError : public ProtocolError {
 public:
  SchemaError(const std::string& field, const std::string& what)
      : ProtocolError("schema error at '" + field + "': " + what), field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class EncodingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sharedctl
