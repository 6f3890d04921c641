#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace selmut {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: bad indices, size mismatches, out-of-range parameters.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A rate model that breaks the positivity or monotonicity contract.
class InvalidModelError : public Error {
 public:
  using Error::Error;
};

/// R(., q) = 1 has no root below the bracket cap.
class NoRootError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A quantity left its mathematical domain (log of zero, division by zero mass).
class DomainError : public Error {
 public:
  using Error::Error;
};

class SearchFailure : public Error {
 public:
  using Error::Error;
};

/// The static irreducibility certificate needs strictly positive birth rates.
class CertificateUnavailable : public Error {
 public:
  using Error::Error;
};

/// Scenario validation failure; carries every offending item, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : Error(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out = "scenario validation failed";
    for (const auto& s : issues) {
      out += "\n  - ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> issues_;
};

}  // namespace selmut
