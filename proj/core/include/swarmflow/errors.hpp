#pragma once

#include <stdexcept>
#include <string>

namespace swarmflow {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Matrix/vector dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite input, divergence, or a failed numerical factorization.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Argument outside its admissible domain (times outside a window, bad indices, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// The controllability Gramian of a window could not be Cholesky-factored.
class GramianSingularError : public NumericError {
 public:
  GramianSingularError(const std::string& what, double min_eigenvalue)
      : NumericError(what), min_eigenvalue_(min_eigenvalue) {}

  double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

// (A, B) fails the Kalman rank test.
class UncontrollableError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents (checkpoint header, CSV cells, config text).
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace swarmflow
