#pragma once

#include <stdexcept>
#include <string>

namespace brakesense {

// Failure categories map one-to-one onto CLI exit codes.
enum class ErrorKind {
  Usage = 2,      // bad arguments or configuration
  Data = 3,       // malformed or insufficient input data
  Numerical = 4,  // numerical failure (non-convergence, non-finite loss, ...)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

}  // namespace brakesense
