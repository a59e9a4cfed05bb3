#pragma once

#include <stdexcept>
#include <string>

namespace regflow {

// Base class for every failure raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Input violates a precondition (bad dims, singular transform, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but the quantity is undefined for it
// (zero variance, empty mask, empty histogram).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

// Optimizer produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace regflow
