#pragma once

#include <cstddef>

#include "biloop/linalg.hpp"
#include "biloop/oracle.hpp"
#include "biloop/trace.hpp"

namespace biloop::aid {

// One AID scheme instance: N inner gradient steps at stepsize alpha, Q
// linear-system gradient steps at stepsize eta, K outer steps at stepsize
// beta, with warm starts for y and v. beta = 0 is allowed (the outer iterate
// stays put, useful for fixed-x diagnostics).
struct LoopConfig {
  std::size_t N = 1;
  std::size_t Q = 1;
  std::size_t K = 1;
  double alpha = 0.0;
  double eta = 0.0;
  double beta = 0.0;
  bool warm_start_y = true;
  bool warm_start_v = true;
  DenseVector x0;
  DenseVector y0;
  DenseVector v0;
};

// N gradient-descent steps on g(x, .) from y_start. counters.gc += N.
DenseVector inner_gd(const BilevelOracle& oracle, const DenseVector& x,
                     const DenseVector& y_start, std::size_t n, double alpha,
                     CostCounters& counters);

// Q gradient-descent steps on the linear system
//   grad2_yy g(x, y_n) v = grad_y f(x, y_n)
// from v_start. The right-hand side is evaluated once and reused across the Q
// steps. counters.mv += Q, counters.gc += 1.
DenseVector linear_system_gd(const BilevelOracle& oracle, const DenseVector& x,
                             const DenseVector& y_n, const DenseVector& v_start,
                             std::size_t q, double eta, CostCounters& counters);

// grad_x f(x, y_n) - grad_x grad_y g(x, y_n) * v_q.
// counters.gc += 1, counters.mv += 1.
DenseVector aid_hypergradient(const BilevelOracle& oracle, const DenseVector& x,
                              const DenseVector& y_n, const DenseVector& v_q,
                              CostCounters& counters);

// Full double-warm-start AID run: K iterations of inner_gd, linear_system_gd,
// aid_hypergradient and the outer step x <- x - beta * estimate. After the
// run the counters satisfy gc == K(N+2) and mv == K(Q+1).
RunTrace run_aid(const BilevelOracle& oracle, const LoopConfig& config,
                 const RunOptions& options = {});

}  // namespace biloop::aid
