#pragma once

#include <stdexcept>
#include <string>

namespace sacfv {

/// Base class for all library errors.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/// File parsing / serialization failures.
class io_error : public error {
 public:
  using error::error;
};

/// Violated preconditions on user-supplied data (bad config, bad mesh file,
/// incompatible meshes, out-of-range arguments).
class validation_error : public error {
 public:
  using error::error;
};

/// Newton iteration exhausted its iteration budget or the damping floor.
class non_convergence_error : public error {
 public:
  non_convergence_error(const std::string& msg, int step_index)
      : error(msg), step_index(step_index) {}
  int step_index = -1;
};

/// Inner linear solve stagnated before reaching its tolerance.
class linear_solve_error : public error {
 public:
  linear_solve_error(const std::string& msg, int step_index)
      : error(msg), step_index(step_index) {}
  int step_index = -1;
};

/// NaN or Inf appeared in an iterate or a field.
class non_finite_error : public error {
 public:
  explicit non_finite_error(const std::string& msg, int step_index = -1)
      : error(msg), step_index(step_index) {}
  int step_index = -1;
};

}  // namespace sacfv
