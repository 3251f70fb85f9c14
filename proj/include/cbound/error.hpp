#pragma once

#include <stdexcept>
#include <string>

namespace cbound {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A partition part has zero estimated probability mass.
class DegeneratePartition : public Error {
 public:
  using Error::Error;
};

// Rejection sampling gave up on a part.
class DegeneratePart : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class PreconditionViolated : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class StudyError : public Error {
 public:
  using Error::Error;
};

}  // namespace cbound
