#ifndef PRISAMPLER_ERRORS_HPP
#define PRISAMPLER_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace prisampler {

// Bad arguments, malformed files, schema violations. CLI exit code 1.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// Inconsistent or unsupported configuration. CLI exit code 1.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Non-finite losses/gradients, divergence. CLI exit code 2.
class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failures inside integrators or linear algebra. CLI exit code 2.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace prisampler

#endif  // PRISAMPLER_ERRORS_HPP
