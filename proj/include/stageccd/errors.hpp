#ifndef STAGECCD_ERRORS_HPP
#define STAGECCD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace stageccd {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value violates a documented invariant or precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A point or device position lies outside the stage envelope.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The mesh is too coarse to represent the requested rib layout.
class MeshResolutionError : public Error {
 public:
  using Error::Error;
};

/// Element geometry is degenerate; the message names the element.
class AssemblyError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be positive definite failed to factor.
class FactorizationError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver failed to converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A sensor or actuator set cannot resolve the requested coordinates.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown inside an optimizer.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// No controller meets the robustness bound within the search range.
class SynthesisError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent pipeline configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace stageccd

#endif  // STAGECCD_ERRORS_HPP
