#include "biloop/analysis.hpp"

#include <cmath>
#include <string>

#include "biloop/errors.hpp"

namespace biloop::analysis {

namespace {

constexpr double kBetaScale = 0.5;  // order constants are fixed to one throughout

std::size_t ceil_at_least_one(double v) {
  if (!(v > 0.0)) return 1;
  return static_cast<std::size_t>(std::ceil(v));
}

DenseVector solve_inner(const BilevelOracle& oracle, const DenseVector& x, double tol) {
  if (oracle.exact.has_y_star()) return oracle.exact.y_star(x);
  DenseVector y(oracle.dim_y, 0.0);
  const double step = 1.0 / oracle.constants.L;
  const std::size_t cap = 20'000'000;
  for (std::size_t it = 0; it < cap; ++it) {
    DenseVector g = oracle.grad_y_g(x, y);
    if (norm(g) <= tol) return y;
    axpy(-step, g, y);
  }
  throw ConvergenceError("inner solve did not reach tolerance " + std::to_string(tol));
}

}  // namespace

DerivedConstants DerivedConstants::from(const AssumptionConstants& c) {
  DerivedConstants out;
  out.L = c.L;
  out.mu = c.mu;
  out.rho = c.rho;
  out.M = c.M;
  out.kappa = c.kappa();
  out.L_phi = smoothness_constant(c);
  return out;
}

double smoothness_constant(const AssumptionConstants& c) {
  const double L = c.L, mu = c.mu, rho = c.rho, M = c.M;
  return L + (2.0 * L * L + rho * M * M) / mu +
         (2.0 * rho * L * M + L * L * L) / (mu * mu) +
         rho * L * L * M / (mu * mu * mu);
}

double cq_constant(std::size_t q_steps, double eta, const AssumptionConstants& c) {
  const double L = c.L, mu = c.mu, rho = c.rho, M = c.M;
  const auto q = static_cast<double>(q_steps);
  const double decay = 1.0 - eta * mu;
  const double decay_q = std::pow(decay, q);
  const double decay_qm1 = q_steps == 0 ? 0.0 : std::pow(decay, q - 1.0);
  return q * decay_qm1 * rho * M * eta / mu +
         (1.0 - decay_q * (1.0 + eta * q * mu)) * rho * M / (mu * mu) +
         (1.0 - decay_q) * L / mu;
}

const char* scheme_name(Algorithm algorithm, SchemeId scheme) {
  if (algorithm == Algorithm::aid) {
    switch (scheme) {
      case SchemeId::n_q_loop: return "aid/n-q-loop";
      case SchemeId::n_loop: return "aid/n-loop";
      case SchemeId::q_loop: return "aid/q-loop";
      case SchemeId::no_loop: return "aid/no-loop";
      default: break;
    }
  } else {
    switch (scheme) {
      case SchemeId::nn_loop: return "itd/n-n-loop";
      case SchemeId::no_loop: return "itd/no-loop";
      default: break;
    }
  }
  return "invalid";
}

HyperparamDefaults default_hyperparams(Algorithm algorithm, SchemeId scheme,
                                       const AssumptionConstants& c, double epsilon) {
  if (!(epsilon > 0.0)) throw ParameterError("epsilon must be > 0");
  const double kappa = c.kappa();
  const double l_phi = smoothness_constant(c);
  const std::size_t n_kappa = ceil_at_least_one(kappa * std::log(kappa));
  const std::size_t n_kappa_eps = ceil_at_least_one(kappa * std::log(kappa / epsilon));

  // beta = c_beta * kappa^(3-p) / L_phi, p the scheme's outer-stepsize order.
  auto beta_for = [&](double p) { return kBetaScale * std::pow(kappa, 3.0 - p) / l_phi; };

  HyperparamDefaults d;
  d.alpha = 1.0 / c.L;
  d.eta = 1.0 / c.L;

  if (algorithm == Algorithm::aid) {
    switch (scheme) {
      case SchemeId::n_q_loop:
        d.N = n_kappa;
        d.Q = n_kappa_eps;
        d.beta = beta_for(3.0);
        return d;
      case SchemeId::n_loop:
        d.N = n_kappa;
        d.Q = 1;
        d.beta = beta_for(4.0);
        return d;
      case SchemeId::q_loop:
        d.N = 1;
        d.Q = n_kappa_eps;
        d.beta = beta_for(4.0);
        return d;
      case SchemeId::no_loop: {
        d.N = 1;
        d.Q = 1;
        const double q = static_cast<double>(d.Q);
        d.eta = std::min({d.alpha * c.mu * c.mu / (128.0 * q * q * c.L * c.L),
                          d.alpha / 4.0, 1.0 / (c.mu * q)});
        d.beta = beta_for(6.0);
        return d;
      }
      default:
        throw ParameterError("nn_loop is not an AID scheme");
    }
  }

  switch (scheme) {
    case SchemeId::nn_loop:
      d.N = n_kappa_eps;
      d.Q = d.N;  // the reverse pass always runs over the whole path
      d.alpha = 1.0 / (2.0 * c.L);
      d.eta = d.alpha;
      d.beta = beta_for(3.0);
      return d;
    case SchemeId::no_loop:
      d.N = 1;
      d.Q = d.N;
      d.alpha = 1.0 / (2.0 * static_cast<double>(d.N) * c.L);
      d.eta = d.alpha;
      d.beta = beta_for(3.0);
      return d;
    default:
      throw ParameterError("ITD schemes are nn_loop and no_loop");
  }
}

DenseVector exact_hypergradient(const BilevelOracle& oracle, const DenseVector& x,
                                double tol) {
  const DenseVector y_star = solve_inner(oracle, x, tol);

  // Assemble grad2_yy g(x, y*) with unit-vector HVP probes and symmetrize
  // away probe roundoff.
  const std::size_t q = oracle.dim_y;
  DenseMatrix hessian(q, q, 0.0);
  for (std::size_t j = 0; j < q; ++j) {
    DenseVector e(q, 0.0);
    e[j] = 1.0;
    const DenseVector column = oracle.hvp_yy_g(x, y_star, e);
    for (std::size_t i = 0; i < q; ++i) hessian(i, j) = column[i];
  }
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = i + 1; j < q; ++j) {
      const double avg = 0.5 * (hessian(i, j) + hessian(j, i));
      hessian(i, j) = avg;
      hessian(j, i) = avg;
    }
  }

  const DenseVector v_star = solve_spd(hessian, oracle.grad_y_f(x, y_star));
  return oracle.grad_x_f(x, y_star) - oracle.jvp_xy_g(x, y_star, v_star);
}

DenseVector finite_difference_hypergradient(const BilevelOracle& oracle,
                                            const DenseVector& x, double h,
                                            double tol) {
  if (!(h >= 1e-7 && h <= 1e-3)) {
    throw ParameterError("finite-difference step h must lie in [1e-7, 1e-3]");
  }
  if (!oracle.f_value) {
    throw ContractViolation("finite_difference_hypergradient requires f_value");
  }

  auto phi = [&](const DenseVector& point) {
    const DenseVector y_star = solve_inner(oracle, point, tol);
    return oracle.f_value(point, y_star);
  };

  DenseVector grad(oracle.dim_x, 0.0);
  DenseVector probe = x;
  for (std::size_t i = 0; i < oracle.dim_x; ++i) {
    const double base = x[i];
    probe[i] = base + h;
    const double plus = phi(probe);
    probe[i] = base - h;
    const double minus = phi(probe);
    probe[i] = base;
    grad[i] = (plus - minus) / (2.0 * h);
  }
  return grad;
}

double itd_floor(double L, double mu, double M, double alpha, std::size_t n) {
  if (!(alpha * mu > 0.0 && alpha * mu < 1.0)) {
    throw ParameterError("itd_floor requires 0 < alpha*mu < 1");
  }
  const auto pow2n = [n](double base) {
    return std::pow(base * base, static_cast<double>(n));
  };
  const double term_l = pow2n(1.0 - alpha * L) / (L * L);
  const double term_mu = pow2n(1.0 - alpha * mu) / (mu * mu);
  return L * L * M * M * (term_l + term_mu);
}

}  // namespace biloop::analysis
