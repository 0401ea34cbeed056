#include <doctest.h>

#include <cmath>

#include "biloop/aid.hpp"
#include "biloop/analysis.hpp"
#include "biloop/errors.hpp"
#include "biloop/problems.hpp"
#include "biloop/rng.hpp"

using namespace biloop;
using namespace biloop::problems;

namespace {

// g(x, y) = 1/2 ||y - x||^2, f = 1/2 ||x||^2 + 1/2 ||y||^2.
BilevelOracle tracking_instance() {
  const DenseMatrix eye = DenseMatrix::identity(2);
  return make_quadratic(eye, eye, DenseVector::zeros(2), eye, DenseVector::zeros(2));
}

DenseVector random_vec(Xoshiro256& rng, std::size_t dim, double scale = 1.0) {
  DenseVector v(dim);
  for (std::size_t i = 0; i < dim; ++i) v[i] = scale * rng.normal();
  return v;
}

}  // namespace

TEST_SUITE("aid") {

TEST_CASE("inner_gd solves the identity problem in one unit step") {
  const BilevelOracle oracle = tracking_instance();
  CostCounters counters;
  const DenseVector x{1.0, 1.0};
  const DenseVector y1 = aid::inner_gd(oracle, x, DenseVector::zeros(2), 1, 1.0, counters);
  CHECK(y1 == x);
  CHECK(counters.gc == 1);
}

TEST_CASE("inner_gd single step on a diagonal Hessian") {
  const DenseMatrix h = DenseMatrix::diagonal(DenseVector{2.0, 1.0});
  const BilevelOracle oracle =
      make_quadratic(h, DenseMatrix::identity(2), DenseVector::zeros(2),
                     DenseMatrix::identity(2), DenseVector::zeros(2));
  // x chosen so y* = (1, 1)
  const DenseVector x{2.0, 1.0};
  CostCounters counters;
  const DenseVector y1 = aid::inner_gd(oracle, x, DenseVector::zeros(2), 1, 0.25, counters);
  CHECK(y1[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(y1[1] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("inner_gd respects the geometric contraction bound") {
  const BilevelOracle oracle = make_seeded_quadratic(3, 4, 10.0, 14);
  Xoshiro256 rng(15);
  const DenseVector x = random_vec(rng, 3);
  const DenseVector y0 = random_vec(rng, 4);
  const DenseVector y_star = oracle.exact.y_star(x);
  const double alpha = 1.0 / oracle.constants.L;
  const double rate = 1.0 - alpha * oracle.constants.mu;
  const double start = norm_sq(y0 - y_star);
  for (std::size_t n = 1; n <= 30; ++n) {
    CostCounters counters;
    const DenseVector y_n = aid::inner_gd(oracle, x, y0, n, alpha, counters);
    CHECK(norm_sq(y_n - y_star) <= std::pow(rate, static_cast<double>(n)) * start + 1e-12);
    CHECK(counters.gc == n);
  }
}

TEST_CASE("inner_gd reports divergence with the step index") {
  BilevelOracle unstable;
  unstable.dim_x = 1;
  unstable.dim_y = 1;
  unstable.constants = {1.0, 1.0, 0.0, 1.0};
  unstable.grad_y_g = [](const DenseVector&, const DenseVector& y) {
    return DenseVector{-1e160 * (1.0 + std::abs(y[0]))};
  };
  CostCounters counters;
  try {
    aid::inner_gd(unstable, DenseVector{0.0}, DenseVector{0.0}, 10, 1.0, counters);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& err) {
    CHECK(err.index() >= 1);
  }
}

TEST_CASE("linear_system_gd follows the hand recursion") {
  const DenseMatrix h = DenseMatrix::diagonal(DenseVector{2.0, 1.0});
  const BilevelOracle oracle =
      make_quadratic(h, DenseMatrix::identity(2), DenseVector::zeros(2),
                     DenseMatrix::identity(2), DenseVector::zeros(2));
  // grad_y f(x, y) = y - d = (1, 1) at y = (1, 1)
  const DenseVector x{0.0, 0.0};
  const DenseVector y_n{1.0, 1.0};
  const DenseVector v0 = DenseVector::zeros(2);

  CostCounters c1;
  const DenseVector v1 = aid::linear_system_gd(oracle, x, y_n, v0, 1, 0.25, c1);
  CHECK(v1[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(v1[1] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(c1.mv == 1);
  CHECK(c1.gc == 1);

  CostCounters c2;
  const DenseVector v2 = aid::linear_system_gd(oracle, x, y_n, v0, 2, 0.25, c2);
  CHECK(v2[0] == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(v2[1] == doctest::Approx(0.4375).epsilon(1e-15));

  CostCounters c3;
  const DenseVector v200 = aid::linear_system_gd(oracle, x, y_n, v0, 200, 0.25, c3);
  CHECK(v200[0] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(v200[1] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(c3.mv == 200);
  CHECK(c3.gc == 1);
}

TEST_CASE("aid_hypergradient on the worst-case instance with exact v") {
  const BilevelOracle oracle = make_lower_bound_instance(2.0, 1.0, 1.0);
  const DenseVector x{0.0, 0.0};
  const DenseVector v_star = oracle.exact.v_star(x);
  CHECK(v_star[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(v_star[1] == doctest::Approx(1.0).epsilon(1e-15));
  CostCounters counters;
  const DenseVector est =
      aid::aid_hypergradient(oracle, x, DenseVector{3.0, -7.0}, v_star, counters);
  CHECK(est[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(est[1] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(counters.gc == 1);
  CHECK(counters.mv == 1);
}

TEST_CASE("aid_hypergradient with exact sub-solutions reduces to grad_phi") {
  const BilevelOracle oracle = make_seeded_quadratic(4, 4, 10.0, 16);
  Xoshiro256 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const DenseVector x = random_vec(rng, 4);
    CostCounters counters;
    const DenseVector est = aid::aid_hypergradient(
        oracle, x, oracle.exact.y_star(x), oracle.exact.v_star(x), counters);
    CHECK(norm(est - oracle.exact.grad_phi(x)) <= 1e-12 * (1.0 + norm(est)));
  }
}

TEST_CASE("aid_hypergradient with v = 0 returns grad_x f") {
  const BilevelOracle oracle = make_seeded_quadratic(3, 3, 5.0, 18);
  Xoshiro256 rng(19);
  const DenseVector x = random_vec(rng, 3);
  const DenseVector y = random_vec(rng, 3);
  CostCounters counters;
  const DenseVector est =
      aid::aid_hypergradient(oracle, x, y, DenseVector::zeros(3), counters);
  CHECK(est == oracle.grad_x_f(x, y));
}

TEST_CASE("run_aid with beta = 0 keeps the iterate") {
  const BilevelOracle oracle = make_seeded_quadratic(3, 3, 5.0, 20);
  aid::LoopConfig config;
  config.N = 2;
  config.Q = 2;
  config.K = 1;
  config.alpha = 1.0 / oracle.constants.L;
  config.eta = config.alpha;
  config.beta = 0.0;
  Xoshiro256 rng(21);
  config.x0 = random_vec(rng, 3);
  config.y0 = DenseVector::zeros(3);
  config.v0 = DenseVector::zeros(3);
  const RunTrace trace = aid::run_aid(oracle, config);
  CHECK(trace.final_x == config.x0);
  CHECK(trace.records.size() == 1);
}

TEST_CASE("run_aid matches a manual composition of the operations") {
  const BilevelOracle oracle = make_seeded_quadratic(3, 4, 8.0, 22);
  aid::LoopConfig config;
  config.N = 3;
  config.Q = 2;
  config.K = 2;
  config.alpha = 1.0 / oracle.constants.L;
  config.eta = config.alpha;
  config.beta = 0.01;
  Xoshiro256 rng(23);
  config.x0 = random_vec(rng, 3);
  config.y0 = random_vec(rng, 4);
  config.v0 = random_vec(rng, 4);

  const RunTrace trace = aid::run_aid(oracle, config);

  // replicate: warm starts carry y^N and v^Q across iterations bit-exactly
  CostCounters counters;
  DenseVector x = config.x0;
  DenseVector y = config.y0;
  DenseVector v = config.v0;
  for (std::size_t k = 0; k < config.K; ++k) {
    y = aid::inner_gd(oracle, x, y, config.N, config.alpha, counters);
    v = aid::linear_system_gd(oracle, x, y, v, config.Q, config.eta, counters);
    const DenseVector est = aid::aid_hypergradient(oracle, x, y, v, counters);
    axpy(-config.beta, est, x);
  }
  CHECK(trace.final_x == x);
  CHECK(trace.records.back().gc_cum == counters.gc);
  CHECK(trace.records.back().mv_cum == counters.mv);
}

TEST_CASE("cold starts reset the sub-loop initializations") {
  const BilevelOracle oracle = make_seeded_quadratic(3, 4, 8.0, 24);
  aid::LoopConfig config;
  config.N = 2;
  config.Q = 2;
  config.K = 3;
  config.alpha = 1.0 / oracle.constants.L;
  config.eta = config.alpha;
  config.beta = 0.01;
  config.warm_start_y = false;
  config.warm_start_v = false;
  Xoshiro256 rng(25);
  config.x0 = random_vec(rng, 3);
  config.y0 = random_vec(rng, 4);
  config.v0 = random_vec(rng, 4);  // ignored: cold v restarts from zero

  const RunTrace trace = aid::run_aid(oracle, config);

  CostCounters counters;
  DenseVector x = config.x0;
  for (std::size_t k = 0; k < config.K; ++k) {
    const DenseVector y =
        aid::inner_gd(oracle, x, config.y0, config.N, config.alpha, counters);
    const DenseVector v = aid::linear_system_gd(oracle, x, y, DenseVector::zeros(4),
                                                config.Q, config.eta, counters);
    const DenseVector est = aid::aid_hypergradient(oracle, x, y, v, counters);
    axpy(-config.beta, est, x);
  }
  CHECK(trace.final_x == x);
}

TEST_CASE("counter identities after a run") {
  const BilevelOracle oracle = make_seeded_quadratic(3, 3, 6.0, 26);
  aid::LoopConfig config;
  config.N = 5;
  config.Q = 7;
  config.K = 11;
  config.alpha = 1.0 / oracle.constants.L;
  config.eta = config.alpha;
  config.beta = 0.001;
  config.x0 = DenseVector::zeros(3);
  config.y0 = DenseVector::zeros(3);
  config.v0 = DenseVector::zeros(3);
  const RunTrace trace = aid::run_aid(oracle, config);
  CHECK(trace.records.back().gc_cum == config.K * (config.N + 2));
  CHECK(trace.records.back().mv_cum == config.K * (config.Q + 1));
  // cumulative counters strictly increase record to record
  for (std::size_t i = 1; i < trace.records.size(); ++i) {
    CHECK(trace.records[i].gc_cum > trace.records[i - 1].gc_cum);
    CHECK(trace.records[i].mv_cum > trace.records[i - 1].mv_cum);
  }
}

TEST_CASE("run_aid converges on the worst-case instance") {
  // The AID callbacks on this instance do not depend on y at all, so the
  // warm-started v-loop drives the estimate to the exact hypergradient and
  // the outer iterate to stationarity; there is no residual floor here.
  const BilevelOracle oracle = make_lower_bound_instance(2.0, 1.0, 1.0);
  aid::LoopConfig config;
  config.N = 1;
  config.Q = 50;
  config.K = 5000;
  config.alpha = 0.25;
  config.eta = 0.25;
  config.beta = 0.5 / analysis::smoothness_constant(oracle.constants);
  config.x0 = DenseVector::ones(2);
  config.y0 = DenseVector::zeros(2);
  config.v0 = DenseVector::zeros(2);
  const RunTrace trace = aid::run_aid(oracle, config);
  CHECK(*trace.final_grad_true_norm_sq <= 1e-12);
}

TEST_CASE("run_aid with scheme defaults reaches stationarity on a quadratic") {
  const BilevelOracle oracle = make_seeded_quadratic(5, 5, 10.0, 27);
  const analysis::HyperparamDefaults defaults = analysis::default_hyperparams(
      analysis::Algorithm::aid, analysis::SchemeId::n_q_loop, oracle.constants, 1e-6);

  // start near the stationary point: x* solves grad_phi(x) = 0, found by one
  // Newton step using a finite-difference Hessian of the (quadratic) gradient
  Xoshiro256 rng(28);
  const DenseVector g0 = oracle.exact.grad_phi(DenseVector::zeros(5));
  DenseMatrix hess_phi(5, 5, 0.0);
  for (std::size_t j = 0; j < 5; ++j) {
    DenseVector e = DenseVector::zeros(5);
    e[j] = 1.0;
    const DenseVector col = oracle.exact.grad_phi(e) - g0;  // exact: gradient is linear
    for (std::size_t i = 0; i < 5; ++i) hess_phi(i, j) = col[i];
  }
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = i + 1; j < 5; ++j) {
      const double avg = 0.5 * (hess_phi(i, j) + hess_phi(j, i));
      hess_phi(i, j) = avg;
      hess_phi(j, i) = avg;
    }
  }
  const DenseVector x_star = -1.0 * solve_spd(hess_phi, g0);
  REQUIRE(norm(oracle.exact.grad_phi(x_star)) <= 1e-10);

  aid::LoopConfig config;
  config.N = defaults.N;
  config.Q = defaults.Q;
  config.K = 2000;
  config.alpha = defaults.alpha;
  config.eta = defaults.eta;
  config.beta = defaults.beta;
  config.x0 = x_star + random_vec(rng, 5, 1e-4);
  config.y0 = DenseVector::zeros(5);
  config.v0 = DenseVector::zeros(5);
  const RunTrace trace = aid::run_aid(oracle, config);
  double lowest = *trace.records.front().grad_true_norm_sq;
  for (const TraceRecord& rec : trace.records) {
    lowest = std::min(lowest, *rec.grad_true_norm_sq);
  }
  CHECK(lowest <= 1e-8);
}

TEST_CASE("hypergradient error decays per inner step within the paper rate") {
  const BilevelOracle oracle = make_seeded_quadratic(4, 4, 10.0, 29);
  Xoshiro256 rng(30);
  const DenseVector x = random_vec(rng, 4);
  const DenseVector y0 = random_vec(rng, 4);
  const DenseVector grad_phi = oracle.exact.grad_phi(x);
  const double alpha = 1.0 / oracle.constants.L;
  const double step_bound = std::sqrt(1.0 - alpha * oracle.constants.mu);

  double previous = -1.0;
  for (std::size_t n = 1; n <= 50; ++n) {
    CostCounters counters;
    const DenseVector y_n = aid::inner_gd(oracle, x, y0, n, alpha, counters);
    // exact linear solve in place of the Q-loop
    DenseMatrix hess(4, 4, 0.0);
    for (std::size_t j = 0; j < 4; ++j) {
      DenseVector e = DenseVector::zeros(4);
      e[j] = 1.0;
      const DenseVector col = oracle.hvp_yy_g(x, y_n, e);
      for (std::size_t i = 0; i < 4; ++i) hess(i, j) = col[i];
    }
    const DenseVector v = solve_spd(hess, oracle.grad_y_f(x, y_n));
    const DenseVector est = aid::aid_hypergradient(oracle, x, y_n, v, counters);
    const double err = norm(est - grad_phi);
    if (previous > 0.0) {
      CHECK(err <= step_bound * previous * (1.0 + 1e-9));
    }
    previous = err;
  }
}

TEST_CASE("identical configurations produce identical traces") {
  const BilevelOracle oracle = make_seeded_quadratic(3, 3, 7.0, 31);
  aid::LoopConfig config;
  config.N = 4;
  config.Q = 3;
  config.K = 25;
  config.alpha = 1.0 / oracle.constants.L;
  config.eta = config.alpha;
  config.beta = 0.01;
  config.x0 = DenseVector(3, 0.4);
  config.y0 = DenseVector::zeros(3);
  config.v0 = DenseVector::zeros(3);
  const RunTrace a = aid::run_aid(oracle, config);
  const RunTrace b = aid::run_aid(oracle, config);
  REQUIRE(a.records.size() == b.records.size());
  CHECK(a.final_x == b.final_x);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].grad_est_norm_sq == b.records[i].grad_est_norm_sq);
    CHECK(*a.records[i].grad_true_norm_sq == *b.records[i].grad_true_norm_sq);
  }
}

TEST_CASE("run_aid validates stepsizes against the constants") {
  const BilevelOracle oracle = make_seeded_quadratic(3, 3, 5.0, 32);
  aid::LoopConfig config;
  config.N = 1;
  config.Q = 1;
  config.K = 1;
  config.alpha = 2.0 / oracle.constants.L;  // violates alpha <= 1/L
  config.eta = 1.0 / oracle.constants.L;
  config.beta = 0.1;
  config.x0 = DenseVector::zeros(3);
  config.y0 = DenseVector::zeros(3);
  config.v0 = DenseVector::zeros(3);
  CHECK_THROWS_AS(aid::run_aid(oracle, config), ParameterError);
  config.alpha = 1.0 / oracle.constants.L;
  config.beta = -0.1;
  CHECK_THROWS_AS(aid::run_aid(oracle, config), ParameterError);
}

}  // TEST_SUITE
