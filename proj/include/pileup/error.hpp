#pragma once

#include <stdexcept>
#include <string>

namespace pileup {

// Argument outside the domain of an operation (singular kernel, coincident
// particles, mismatched grids, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// The (n, beta) -> alpha change of frame is not admissible.
class FrameError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid potential descriptor, tabulated data or run configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An iterative solver stopped without meeting its tolerance.  The solver that
// throws this attaches its best iterate through a derived type.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pileup
