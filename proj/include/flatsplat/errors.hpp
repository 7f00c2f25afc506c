#pragma once

#include <stdexcept>
#include <string>

namespace flatsplat {

// Root of every error raised by the library. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class BehindCamera : public Error {
 public:
  BehindCamera() : Error("point is behind the camera near plane") {}
};

class IoError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class EmptyBackgroundClass : public Error {
 public:
  EmptyBackgroundClass() : Error("no histogram mass at or below the threshold bin") {}
};

class InvalidLambda : public Error {
 public:
  using Error::Error;
};

}  // namespace flatsplat
