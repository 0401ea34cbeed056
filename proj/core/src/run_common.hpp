#pragma once

#include <chrono>
#include <optional>

#include "biloop/analysis.hpp"
#include "biloop/errors.hpp"
#include "biloop/linalg.hpp"
#include "biloop/oracle.hpp"

namespace biloop::detail {

inline void check_inner_stepsize(double alpha, const AssumptionConstants& c,
                                 const char* name) {
  if (!(alpha > 0.0)) {
    throw ParameterError(std::string(name) + " must be > 0");
  }
  if (alpha > 1.0 / c.L) {
    throw ParameterError(std::string(name) + " exceeds 1/L = " +
                         std::to_string(1.0 / c.L));
  }
}

// Fills the true-gradient column: every iteration when the oracle has a
// closed form, else on trace_stride multiples via the reference oracle.
// Reference work is never charged to the run's counters.
inline std::optional<double> true_gradient_norm_sq(const BilevelOracle& oracle,
                                                   const DenseVector& x,
                                                   std::size_t k,
                                                   std::size_t trace_stride,
                                                   bool compute_reference,
                                                   double reference_tol) {
  if (oracle.exact.has_grad_phi()) {
    return norm_sq(oracle.exact.grad_phi(x));
  }
  if (compute_reference && trace_stride > 0 && k % trace_stride == 0) {
    return norm_sq(analysis::exact_hypergradient(oracle, x, reference_tol));
  }
  return std::nullopt;
}

class WallClock {
 public:
  WallClock() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    const auto now = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(now - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace biloop::detail
