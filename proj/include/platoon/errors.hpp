#pragma once

#include <stdexcept>
#include <string>

namespace platoon {

/// Invalid physical or algorithmic parameter (non-positive dt, zero gain, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Vector/matrix sizes that do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the domain of a model, e.g. a non-positive IDM gap.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Scenario or CLI configuration rejected during validation. `field()` holds
/// the JSON path of the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Malformed input file. `row()` is the 1-based line number (0 when not tied to a row).
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : std::runtime_error(row == 0 ? what : "line " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace platoon
