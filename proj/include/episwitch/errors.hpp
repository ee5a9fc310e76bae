#pragma once

#include <stdexcept>
#include <string>

namespace episwitch {

// Malformed model or configuration (bad dimensions, negative rates, ...).
struct ModelError : std::runtime_error {
  explicit ModelError(const std::string& msg) : std::runtime_error(msg) {}
};

// Argument outside the operation's domain (point off the cube, bad counts...).
struct DomainError : std::invalid_argument {
  explicit DomainError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Iteration failed to converge, NaN appeared, integrator overshoot, ...
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Requested state space or workload exceeds a configured cap.
struct SizeError : std::runtime_error {
  explicit SizeError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace episwitch
