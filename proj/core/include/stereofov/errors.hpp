#pragma once

#include <stdexcept>
#include <string>

namespace stereofov {

/// Input lies outside the validated range of a model (extrapolation disabled).
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Input violates an operation's mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Rendering request cannot be honored at the display's resolution.
class ResolutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical fit failed or the data cannot determine the model.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation is not allowed in the object's current state.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Request conflicts with already-recorded state (stale or duplicate).
class ConflictError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stereofov
