#pragma once

#include <cstddef>

#include "biloop/linalg.hpp"
#include "biloop/oracle.hpp"

namespace biloop::analysis {

// Derived problem constants. L_phi is the smoothness parameter of
// Phi(x) = f(x, y*(x)).
struct DerivedConstants {
  double L = 0.0;
  double mu = 0.0;
  double rho = 0.0;
  double M = 0.0;
  double kappa = 0.0;
  double L_phi = 0.0;

  static DerivedConstants from(const AssumptionConstants& c);
};

// L_phi = L + (2L^2 + rho M^2)/mu + (2 rho L M + L^3)/mu^2 + rho L^2 M / mu^3.
double smoothness_constant(const AssumptionConstants& c);

// C_Q = Q (1-eta mu)^{Q-1} rho M eta / mu
//     + (1 - (1-eta mu)^Q (1 + eta Q mu)) rho M / mu^2
//     + (1 - (1-eta mu)^Q) L / mu.
// Monotone non-decreasing in Q; zero at Q = 0.
double cq_constant(std::size_t q_steps, double eta, const AssumptionConstants& c);

enum class Algorithm { aid, itd };

// Loop-size regimes: how large N and Q are relative to kappa ln kappa.
// no_loop means both sub-problems get O(1) iterations per base-loop step;
// nn_loop is the ITD regime where the reverse pass forces Q = N.
enum class SchemeId { n_q_loop, n_loop, q_loop, no_loop, nn_loop };

const char* scheme_name(Algorithm algorithm, SchemeId scheme);

struct HyperparamDefaults {
  std::size_t N = 1;
  std::size_t Q = 1;
  double alpha = 0.0;
  double eta = 0.0;
  double beta = 0.0;
};

// Per-scheme loop sizes and stepsizes with all order constants fixed to one:
// N and Q use the ceil(kappa ln kappa) / ceil(kappa ln(kappa/epsilon))
// orders, alpha and eta the scheme's prescription, and beta = 0.5 *
// kappa^(3-p) / L_phi where kappa^-p is the scheme's outer-stepsize order
// (1/L_phi itself being the kappa^-3 reference scale). Every field is a
// plain default that a config may override.
HyperparamDefaults default_hyperparams(Algorithm algorithm, SchemeId scheme,
                                       const AssumptionConstants& c, double epsilon);

// True hypergradient grad Phi(x) = grad_x f(x,y*) - grad_x grad_y g(x,y*) v*
// with v* from a direct SPD solve. y* comes from the closed form when the
// oracle has one, otherwise from inner gradient descent run until
// ||grad_y g|| <= tol; the inner Hessian is assembled column-by-column with
// dim_y HVP probes. Never touches a run's cost counters.
DenseVector exact_hypergradient(const BilevelOracle& oracle, const DenseVector& x,
                                double tol);

// Central finite differences of Phi(x) = f(x, y*(x)) with step h per
// coordinate, the inner problem solved to tol at every probe point.
// Requires h in [1e-7, 1e-3] and an f_value callback.
DenseVector finite_difference_hypergradient(const BilevelOracle& oracle,
                                            const DenseVector& x, double h,
                                            double tol);

// Non-vanishing ITD residual floor on the worst-case instance:
//   L^2 M^2 [ (1-alpha L)^{2N} / L^2 + (1-alpha mu)^{2N} / mu^2 ].
// Requires 0 < alpha * mu < 1.
double itd_floor(double L, double mu, double M, double alpha, std::size_t n);

}  // namespace biloop::analysis
