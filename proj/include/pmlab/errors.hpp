#pragma once

#include <stdexcept>
#include <string>

namespace pmlab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the admissible range (e.g. F-values beyond the
/// range of J_eps, epsilon too large, s-bar outside (0,1)).
class DomainError : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  using Error::Error;
};

/// Layer positions do not fit the interval or overlap each other.
class GeometryError : public Error {
 public:
  using Error::Error;
};

class NoSolutionError : public Error {
 public:
  using Error::Error;
};

class StiffnessError : public Error {
 public:
  using Error::Error;
};

class NewtonError : public Error {
 public:
  using Error::Error;
};

class BackwardRegimeError : public Error {
 public:
  using Error::Error;
};

class EmptySetError : public Error {
 public:
  using Error::Error;
};

/// Configuration problems; the message starts with the offending field path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class InsufficientEventsError : public Error {
 public:
  using Error::Error;
};

}  // namespace pmlab
