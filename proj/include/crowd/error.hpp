#pragma once

#include <stdexcept>
#include <string>

namespace crowd {

/// Invalid input: bad geometry, malformed scenario, violated precondition.
class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed to reach its tolerance.
class SolverError : public std::runtime_error {
public:
  SolverError(const std::string &what, long iterations, double residual)
      : std::runtime_error(what), iterations_(iterations), residual_(residual) {}

  long iterations() const { return iterations_; }
  double residual() const { return residual_; }

private:
  long iterations_;
  double residual_;
};

} // namespace crowd
