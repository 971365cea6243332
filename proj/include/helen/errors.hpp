#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace helen {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of a function (e.g. digamma at x <= 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated file; carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Non-finite objective, gradient or ELBO encountered during optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace helen
