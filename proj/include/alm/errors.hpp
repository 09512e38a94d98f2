#pragma once

#include <stdexcept>
#include <string>

namespace alm {

/// Bad user input: malformed files, out-of-range ages, invalid parameters.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A parameter violates its invariant. field() names the offending field.
class ValidationError : public InputError {
 public:
  ValidationError(std::string field, const std::string& what)
      : InputError(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A computation was asked for something undefined (e.g. the duration of an
/// all-zero schedule).
class ComputationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace alm
