#pragma once

#include <stdexcept>
#include <string>

namespace quadflip {

// Base of every error raised by the library. Recoverable solver outcomes
// (MPC infeasibility, simulation divergence) are reported as status values
// instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotSkew : public Error {
 public:
  using Error::Error;
};

class DegenerateThrust : public Error {
 public:
  using Error::Error;
};

class SingularYaw : public Error {
 public:
  using Error::Error;
};

class NoFeasibleHistory : public Error {
 public:
  using Error::Error;
};

class Unreachable : public Error {
 public:
  using Error::Error;
};

class NotAttached : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace quadflip
