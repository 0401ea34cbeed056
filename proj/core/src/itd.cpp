#include "biloop/itd.hpp"

#include "biloop/errors.hpp"
#include "run_common.hpp"

namespace biloop::itd {

namespace {

void validate(const BilevelOracle& oracle, const ItdConfig& config) {
  detail::check_inner_stepsize(config.alpha, oracle.constants, "alpha");
  if (!(config.beta >= 0.0)) throw ParameterError("beta must be >= 0");
  if (config.N == 0 || config.K == 0) throw ParameterError("N and K must be positive");
  if (config.x0.dim() != oracle.dim_x) {
    throw ContractViolation("x0 dimension does not match the problem");
  }
  if (config.y0.dim() != oracle.dim_y) {
    throw ContractViolation("y0 dimension does not match the problem");
  }
}

}  // namespace

Trajectory inner_gd_with_trajectory(const BilevelOracle& oracle, const DenseVector& x,
                                    const DenseVector& y_start, std::size_t n,
                                    double alpha, CostCounters& counters) {
  Trajectory trajectory(x, alpha);
  DenseVector y = y_start;
  trajectory.push(y);
  for (std::size_t t = 0; t < n; ++t) {
    axpy(-alpha, oracle.grad_y_g(x, y), y);
    counters.gc += 1;
    if (!y.all_finite()) {
      throw DivergenceError("inner_gd_with_trajectory: iterate became non-finite", t + 1);
    }
    trajectory.push(y);
  }
  return trajectory;
}

DenseVector itd_hypergradient(const BilevelOracle& oracle, const DenseVector& x,
                              const Trajectory& trajectory, double alpha,
                              CostCounters& counters) {
  if (!(trajectory.x() == x) || trajectory.alpha() != alpha) {
    throw ContractViolation(
        "itd_hypergradient: trajectory was recorded at a different (x, alpha)");
  }
  const std::size_t n = trajectory.steps();

  DenseVector estimate = oracle.grad_x_f(x, trajectory.last());
  DenseVector u = oracle.grad_y_f(x, trajectory.last());
  counters.gc += 2;

  DenseVector accumulated(oracle.dim_x, 0.0);
  for (std::size_t t = n; t-- > 0;) {
    axpy(1.0, oracle.jvp_xy_g(x, trajectory.point(t), u), accumulated);
    if (t > 0) {
      axpy(-alpha, oracle.hvp_yy_g(x, trajectory.point(t), u), u);
    }
    // N JVPs and N HVPs are charged per reverse pass even though the
    // backward propagation at t = 0 is skipped (it would feed a t = -1 term
    // that does not exist).
    counters.mv += 2;
  }
  axpy(-alpha, accumulated, estimate);
  return estimate;
}

RunTrace run_itd(const BilevelOracle& oracle, const ItdConfig& config,
                 const RunOptions& options) {
  validate(oracle, config);

  const detail::WallClock clock;
  CostCounters counters;
  RunTrace trace;
  trace.records.reserve(config.K);

  DenseVector x = config.x0;
  DenseVector y_warm = config.y0;

  for (std::size_t k = 0; k < config.K; ++k) {
    const DenseVector& y_init = config.warm_start_y ? y_warm : config.y0;
    const Trajectory trajectory =
        inner_gd_with_trajectory(oracle, x, y_init, config.N, config.alpha, counters);
    const DenseVector estimate =
        itd_hypergradient(oracle, x, trajectory, config.alpha, counters);

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
      throw DivergenceError("run_itd: outer iterate became non-finite", k);
    }
    y_warm = trajectory.last();
  }

  trace.final_x = x;
  trace.final_grad_true_norm_sq = detail::true_gradient_norm_sq(
      oracle, x, 0, 1, options.compute_reference, options.reference_tol);
  return trace;
}

}  // namespace biloop::itd
