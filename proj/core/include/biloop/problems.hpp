#pragma once

#include <cstdint>

#include "biloop/linalg.hpp"
#include "biloop/oracle.hpp"

namespace biloop::problems {

// Quadratic bilevel instance
//
//   g(x, y) = 1/2 y^T H y - x^T B^T y + c^T y
//   f(x, y) = 1/2 x^T A x + 1/2 ||y - d||^2
//
// with H (q x q) and A (p x p) symmetric positive definite and B (q x p).
// The inner solution y*(x) = H^{-1}(B x - c) is closed-form, so every
// hypergradient path has an exact referee. rho = 0 for this family.
BilevelOracle make_quadratic(const DenseMatrix& H, const DenseMatrix& B,
                             const DenseVector& c, const DenseMatrix& A,
                             const DenseVector& d);

// Seeded random quadratic instance with the inner condition number pinned to
// kappa exactly (constants.L / constants.mu == kappa up to roundoff).
BilevelOracle make_seeded_quadratic(std::size_t dim_x, std::size_t dim_y,
                                    double kappa, std::uint64_t seed);

// Two-dimensional worst-case instance
//
//   f(x, y) = 1/2 x^T Z x + M 1^T y
//   g(x, y) = 1/2 y^T Z y - L x^T y + 1^T y,      Z = diag(L, mu),
//
// with closed forms y*(x) = Z^{-1}(L x - 1) and
// grad Phi(x) = Z x + L M Z^{-1} 1. On this instance small-N iterative
// differentiation has a non-vanishing residual floor; see
// analysis::itd_floor.
BilevelOracle make_lower_bound_instance(double L, double mu, double M);

struct HyperRepresentationDims {
  std::size_t train_rows = 40;  // q_s
  std::size_t val_rows = 20;    // p_s
  std::size_t features = 6;     // m
  std::size_t rep_dim = 3;      // r
};

// Hyper-representation regression: the outer variable is a linear feature
// map Lambda (m x r, flattened row-major into x with dim m*r), the inner
// variable the ridge regressor w (dim r):
//
//   g(lambda, w) = 1/(2 q_s) ||X_T mat(lambda) w - Y_T||^2 + gamma/2 ||w||^2
//   f(lambda, w) = 1/(2 p_s) ||X_V mat(lambda) w - Y_V||^2
//
// Data is generated deterministically from the seed (see README for the
// generation law). gamma > 0 keeps the inner problem strongly convex with
// mu >= gamma for every lambda; y*(lambda) is the ridge closed form.
BilevelOracle make_hyper_representation(const HyperRepresentationDims& dims,
                                        double gamma, std::uint64_t seed);

// Same problem with caller-provided data. rep_dim fixes the width of the
// learned map; x_train/x_val are (rows x features).
BilevelOracle make_hyper_representation_from_data(const DenseMatrix& x_train,
                                                  const DenseVector& y_train,
                                                  const DenseMatrix& x_val,
                                                  const DenseVector& y_val,
                                                  std::size_t rep_dim, double gamma);

struct HyperCleaningDims {
  std::size_t samples = 80;
  std::size_t features = 6;
  double train_fraction = 0.5;
  double val_fraction = 0.5;
};

// Regularized logistic-regression hyperparameter optimization with a scalar
// outer variable lambda (dim_x = 1): the effective ridge weight is
// softplus(lambda), so the inner problem stays strongly convex for any real
// lambda. A noise_frac fraction of the training labels is flipped. No exact
// oracle exists; reference gradients come from analysis::exact_hypergradient.
BilevelOracle make_hyper_cleaning(const HyperCleaningDims& dims,
                                  double noise_frac, std::uint64_t seed);

}  // namespace biloop::problems
