#pragma once

#include <stdexcept>
#include <string>

namespace lrcssp {

// Dimension or index mismatch between otherwise well-formed objects.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid user-supplied configuration (generator spec, learner config, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An adaptive context source produced something outside the simplex.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class ImproperPolicyError : public std::runtime_error {
 public:
  ImproperPolicyError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class ProjectionError : public std::runtime_error {
 public:
  ProjectionError(const std::string& what, double gap)
      : std::runtime_error(what + " (gap bound " + std::to_string(gap) + ")"), gap_(gap) {}

  double gap() const noexcept { return gap_; }

 private:
  double gap_;
};

}  // namespace lrcssp
