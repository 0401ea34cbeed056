#pragma once

#include <cstdint>
#include <functional>

#include "biloop/linalg.hpp"

namespace biloop {

// Running tallies of oracle work: gc counts gradient evaluations, mv counts
// Jacobian- plus Hessian-vector products. The optimizer operations increment
// these with a fixed convention (see aid.hpp / itd.hpp); reference
// computations in analysis.hpp never touch a run's counters.
struct CostCounters {
  std::uint64_t gc = 0;
  std::uint64_t mv = 0;
};

// Problem regularity constants: mu-strong convexity of the inner objective in
// y, L-Lipschitz gradients, rho-Lipschitz second derivatives, and M bounding
// ||grad_y f(x, y*(x))||. kappa = L/mu is the inner condition number.
struct AssumptionConstants {
  double L = 1.0;
  double mu = 1.0;
  double rho = 0.0;
  double M = 1.0;

  double kappa() const { return L / mu; }
};

// Optional closed-form reference oracles. Any member may be empty.
struct ExactOracle {
  std::function<DenseVector(const DenseVector&)> y_star;
  std::function<DenseVector(const DenseVector&)> v_star;
  std::function<DenseVector(const DenseVector&)> grad_phi;

  bool has_y_star() const { return static_cast<bool>(y_star); }
  bool has_grad_phi() const { return static_cast<bool>(grad_phi); }
};

// Callback bundle describing one bilevel problem
//
//   min_x f(x, y*(x))   s.t.   y*(x) = argmin_y g(x, y),
//
// through first-order oracles plus the two matrix-vector products the
// optimizers need: hvp_yy_g(x,y,v) = grad2_yy g(x,y) * v and
// jvp_xy_g(x,y,v) = grad_x grad_y g(x,y) * v (result has dim_x entries).
// Oracles are immutable after construction; all callbacks are pure.
struct BilevelOracle {
  std::size_t dim_x = 0;  // p
  std::size_t dim_y = 0;  // q

  std::function<double(const DenseVector&, const DenseVector&)> f_value;
  std::function<DenseVector(const DenseVector&, const DenseVector&)> grad_x_f;
  std::function<DenseVector(const DenseVector&, const DenseVector&)> grad_y_f;
  std::function<DenseVector(const DenseVector&, const DenseVector&)> grad_y_g;
  std::function<DenseVector(const DenseVector&, const DenseVector&, const DenseVector&)>
      hvp_yy_g;
  std::function<DenseVector(const DenseVector&, const DenseVector&, const DenseVector&)>
      jvp_xy_g;

  AssumptionConstants constants;
  ExactOracle exact;
};

}  // namespace biloop
