#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace biloop {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Broken precondition or dimension mismatch between arguments.
class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& what) : Error(what) {}
};

// Invalid construction parameters for a problem or config object.
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error(what) {}
};

// Factorization hit a non-positive pivot: the matrix is not SPD.
class SingularityError : public Error {
 public:
  explicit SingularityError(const std::string& what) : Error(what) {}
};

// An iterate became non-finite. Carries the loop index where it happened.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t index)
      : Error(what + " (index " + std::to_string(index) + ")"), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// An iterative reference computation failed to reach its tolerance.
class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& what) : Error(what) {}
};

// Bad experiment configuration; the message names the offending field.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace biloop
