#pragma once

#include <stdexcept>
#include <string>

namespace percolab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument or malformed input.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Event or experiment geometry that does not fit the region.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Exhaustive enumeration refused (too many free sites).
class GuardError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace percolab
