#include "biloop/aid.hpp"

#include "biloop/errors.hpp"
#include "run_common.hpp"

namespace biloop::aid {

namespace {

void validate(const BilevelOracle& oracle, const LoopConfig& config) {
  detail::check_inner_stepsize(config.alpha, oracle.constants, "alpha");
  detail::check_inner_stepsize(config.eta, oracle.constants, "eta");
  if (!(config.beta >= 0.0)) throw ParameterError("beta must be >= 0");
  if (config.N == 0 || config.Q == 0 || config.K == 0) {
    throw ParameterError("N, Q and K must be positive");
  }
  if (config.x0.dim() != oracle.dim_x) {
    throw ContractViolation("x0 dimension does not match the problem");
  }
  if (config.y0.dim() != oracle.dim_y) {
    throw ContractViolation("y0 dimension does not match the problem");
  }
  if (config.v0.dim() != oracle.dim_y) {
    throw ContractViolation("v0 dimension does not match the problem");
  }
}

}  // namespace

DenseVector inner_gd(const BilevelOracle& oracle, const DenseVector& x,
                     const DenseVector& y_start, std::size_t n, double alpha,
                     CostCounters& counters) {
  DenseVector y = y_start;
  for (std::size_t t = 0; t < n; ++t) {
    axpy(-alpha, oracle.grad_y_g(x, y), y);
    counters.gc += 1;
    if (!y.all_finite()) {
      throw DivergenceError("inner_gd: iterate became non-finite", t + 1);
    }
  }
  return y;
}

DenseVector linear_system_gd(const BilevelOracle& oracle, const DenseVector& x,
                             const DenseVector& y_n, const DenseVector& v_start,
                             std::size_t q, double eta, CostCounters& counters) {
  // The target grad_y f(x, y^N) is fixed across the Q steps; one evaluation.
  const DenseVector rhs = oracle.grad_y_f(x, y_n);
  counters.gc += 1;

  DenseVector v = v_start;
  for (std::size_t step = 0; step < q; ++step) {
    // v <- (I - eta * grad2_yy g) v + eta * rhs
    DenseVector hv = oracle.hvp_yy_g(x, y_n, v);
    counters.mv += 1;
    axpy(-eta, hv, v);
    axpy(eta, rhs, v);
    if (!v.all_finite()) {
      throw DivergenceError("linear_system_gd: iterate became non-finite", step + 1);
    }
  }
  return v;
}

DenseVector aid_hypergradient(const BilevelOracle& oracle, const DenseVector& x,
                              const DenseVector& y_n, const DenseVector& v_q,
                              CostCounters& counters) {
  DenseVector estimate = oracle.grad_x_f(x, y_n);
  counters.gc += 1;
  const DenseVector correction = oracle.jvp_xy_g(x, y_n, v_q);
  counters.mv += 1;
  return estimate - correction;
}

RunTrace run_aid(const BilevelOracle& oracle, const LoopConfig& config,
                 const RunOptions& options) {
  validate(oracle, config);

  const detail::WallClock clock;
  CostCounters counters;
  RunTrace trace;
  trace.records.reserve(config.K);

  DenseVector x = config.x0;
  DenseVector y_warm = config.y0;
  DenseVector v_warm = config.v0;
  const DenseVector v_zero(oracle.dim_y, 0.0);

  for (std::size_t k = 0; k < config.K; ++k) {
    const DenseVector& y_init = config.warm_start_y ? y_warm : config.y0;
    const DenseVector y_n = inner_gd(oracle, x, y_init, config.N, config.alpha, counters);

    const DenseVector& v_init = config.warm_start_v ? v_warm : v_zero;
    const DenseVector v_q =
        linear_system_gd(oracle, x, y_n, v_init, config.Q, config.eta, counters);

    const DenseVector estimate = aid_hypergradient(oracle, x, y_n, v_q, counters);

    TraceRecord rec;
    rec.k = k;
    rec.x_norm = norm(x);
    rec.grad_est_norm_sq = norm_sq(estimate);
    rec.grad_true_norm_sq = detail::true_gradient_norm_sq(
        oracle, x, k, options.trace_stride, options.compute_reference,
        options.reference_tol);
    rec.gc_cum = counters.gc;
    rec.mv_cum = counters.mv;
    rec.wall_ms = options.record_timing ? clock.elapsed_ms() : 0.0;
    trace.records.push_back(std::move(rec));

    axpy(-config.beta, estimate, x);
    if (!x.all_finite()) {
      throw DivergenceError("run_aid: outer iterate became non-finite", k);
    }
    y_warm = y_n;
    v_warm = v_q;
  }

  trace.final_x = x;
  trace.final_grad_true_norm_sq = detail::true_gradient_norm_sq(
      oracle, x, 0, 1, options.compute_reference, options.reference_tol);
  return trace;
}

}  // namespace biloop::aid
