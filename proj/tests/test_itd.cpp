#include <doctest.h>

#include <cmath>

#include "biloop/analysis.hpp"
#include "biloop/errors.hpp"
#include "biloop/itd.hpp"
#include "biloop/problems.hpp"
#include "biloop/rng.hpp"

using namespace biloop;
using namespace biloop::problems;

namespace {

DenseVector random_vec(Xoshiro256& rng, std::size_t dim, double scale = 1.0) {
  DenseVector v(dim);
  for (std::size_t i = 0; i < dim; ++i) v[i] = scale * rng.normal();
  return v;
}

// Quartic inner objective: the Hessian genuinely changes along the path.
//   g(x, y) = 1/2 y^T H0 y + (c4/12) sum_i y_i^4 - x^T B^T y
//   f(x, y) = 1/2 ||x||^2 + 1/2 ||y - d||^2
BilevelOracle quartic_instance(std::size_t p, std::size_t q, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  DenseMatrix b(q, p);
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = 0; j < p; ++j) b(i, j) = 0.3 * rng.normal();
  }
  DenseMatrix h0 = DenseMatrix::identity(q);
  for (std::size_t i = 0; i < q; ++i) h0(i, i) = 0.5 + 0.5 * rng.uniform01();
  DenseVector d(q);
  for (std::size_t i = 0; i < q; ++i) d[i] = rng.normal();
  const double c4 = 0.3;
  const DenseMatrix bt = transpose(b);

  BilevelOracle oracle;
  oracle.dim_x = p;
  oracle.dim_y = q;
  oracle.f_value = [d](const DenseVector& x, const DenseVector& y) {
    return 0.5 * norm_sq(x) + 0.5 * norm_sq(y - d);
  };
  oracle.grad_x_f = [](const DenseVector& x, const DenseVector&) { return x; };
  oracle.grad_y_f = [d](const DenseVector&, const DenseVector& y) { return y - d; };
  oracle.grad_y_g = [h0, b, c4](const DenseVector& x, const DenseVector& y) {
    DenseVector g = matvec(h0, y) - matvec(b, x);
    for (std::size_t i = 0; i < y.dim(); ++i) g[i] += (c4 / 3.0) * y[i] * y[i] * y[i];
    return g;
  };
  oracle.hvp_yy_g = [h0, c4](const DenseVector&, const DenseVector& y,
                             const DenseVector& v) {
    DenseVector h = matvec(h0, v);
    for (std::size_t i = 0; i < v.dim(); ++i) h[i] += c4 * y[i] * y[i] * v[i];
    return h;
  };
  oracle.jvp_xy_g = [bt](const DenseVector&, const DenseVector&, const DenseVector& v) {
    return -1.0 * matvec(bt, v);
  };
  oracle.constants = {4.0, 0.5, 2.0, 10.0};
  return oracle;
}

DenseMatrix probe_hessian(const BilevelOracle& oracle, const DenseVector& x,
                          const DenseVector& y) {
  DenseMatrix h(oracle.dim_y, oracle.dim_y, 0.0);
  for (std::size_t j = 0; j < oracle.dim_y; ++j) {
    DenseVector e = DenseVector::zeros(oracle.dim_y);
    e[j] = 1.0;
    const DenseVector col = oracle.hvp_yy_g(x, y, e);
    for (std::size_t i = 0; i < oracle.dim_y; ++i) h(i, j) = col[i];
  }
  return h;
}

DenseMatrix probe_jacobian(const BilevelOracle& oracle, const DenseVector& x,
                           const DenseVector& y) {
  DenseMatrix j(oracle.dim_x, oracle.dim_y, 0.0);
  for (std::size_t col = 0; col < oracle.dim_y; ++col) {
    DenseVector e = DenseVector::zeros(oracle.dim_y);
    e[col] = 1.0;
    const DenseVector out = oracle.jvp_xy_g(x, y, e);
    for (std::size_t row = 0; row < oracle.dim_x; ++row) j(row, col) = out[row];
  }
  return j;
}

// The chain-rule sum assembled from probed dense matrices.
DenseVector explicit_sum_of_products(const BilevelOracle& oracle, const DenseVector& x,
                                     const itd::Trajectory& traj, double alpha) {
  const std::size_t n = traj.steps();
  const DenseVector gf = oracle.grad_y_f(x, traj.last());
  DenseVector acc(oracle.dim_x, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    DenseVector w = gf;
    for (std::size_t j = n; j-- > t + 1;) {
      w = w - alpha * matvec(probe_hessian(oracle, x, traj.point(j)), w);
    }
    acc = acc + matvec(probe_jacobian(oracle, x, traj.point(t)), w);
  }
  return oracle.grad_x_f(x, traj.last()) - alpha * acc;
}

}  // namespace

TEST_SUITE("itd") {

TEST_CASE("trajectory with N = 0 is the start point at zero cost") {
  const BilevelOracle oracle = make_seeded_quadratic(2, 2, 4.0, 40);
  CostCounters counters;
  const DenseVector y0{0.7, -0.2};
  const itd::Trajectory traj =
      itd::inner_gd_with_trajectory(oracle, DenseVector::zeros(2), y0, 0, 0.1, counters);
  CHECK(traj.steps() == 0);
  CHECK(traj.point(0) == y0);
  CHECK(counters.gc == 0);
  CHECK(counters.mv == 0);
}

TEST_CASE("trajectory of one exact step on the identity instance") {
  const DenseMatrix eye = DenseMatrix::identity(2);
  const BilevelOracle oracle =
      make_quadratic(eye, eye, DenseVector::zeros(2), eye, DenseVector::zeros(2));
  CostCounters counters;
  const DenseVector x{1.0, 1.0};
  const itd::Trajectory traj =
      itd::inner_gd_with_trajectory(oracle, x, DenseVector::zeros(2), 1, 1.0, counters);
  CHECK(traj.point(0) == DenseVector::zeros(2));
  CHECK(traj.point(1) == x);
  CHECK(counters.gc == 1);
}

TEST_CASE("trajectory first step on the worst-case instance") {
  const BilevelOracle oracle = make_lower_bound_instance(2.0, 1.0, 1.0);
  CostCounters counters;
  const itd::Trajectory traj = itd::inner_gd_with_trajectory(
      oracle, DenseVector::zeros(2), DenseVector::zeros(2), 1, 0.25, counters);
  CHECK(traj.point(1)[0] == doctest::Approx(-0.25).epsilon(1e-15));
  CHECK(traj.point(1)[1] == doctest::Approx(-0.25).epsilon(1e-15));
}

TEST_CASE("itd_hypergradient single term on the worst-case instance") {
  const BilevelOracle oracle = make_lower_bound_instance(2.0, 1.0, 1.0);
  CostCounters counters;
  const DenseVector x{0.0, 0.0};
  const itd::Trajectory traj =
      itd::inner_gd_with_trajectory(oracle, x, DenseVector::zeros(2), 1, 0.25, counters);
  const DenseVector est = itd::itd_hypergradient(oracle, x, traj, 0.25, counters);
  CHECK(est[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(est[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(counters.gc == 1 + 2);   // one trajectory step + the two reverse-pass gradients
  CHECK(counters.mv == 2);       // 2N with N = 1
}

TEST_CASE("zero outer-gradient seed collapses the sum") {
  // c = x - d makes y*(x) = d; starting the inner loop at d keeps the whole
  // trajectory there, so grad_y f(x, y^N) = 0 and the estimate is grad_x f.
  const DenseMatrix eye = DenseMatrix::identity(2);
  const DenseVector x{0.8, -0.3};
  const DenseVector d{0.2, 0.5};
  const BilevelOracle oracle = make_quadratic(eye, eye, x - d, eye, d);
  CostCounters counters;
  const itd::Trajectory traj = itd::inner_gd_with_trajectory(oracle, x, d, 4, 0.3, counters);
  CHECK(norm(traj.last() - d) <= 1e-15);
  const DenseVector est = itd::itd_hypergradient(oracle, x, traj, 0.3, counters);
  CHECK(est == oracle.grad_x_f(x, traj.last()));
}

TEST_CASE("long trajectories recover the exact hypergradient") {
  const BilevelOracle oracle = make_seeded_quadratic(4, 4, 10.0, 41);
  Xoshiro256 rng(42);
  const DenseVector x = random_vec(rng, 4);
  const DenseVector y0 = random_vec(rng, 4);
  const double alpha = 1.0 / oracle.constants.L;
  CostCounters counters;
  const itd::Trajectory traj = itd::inner_gd_with_trajectory(oracle, x, y0, 200, alpha, counters);
  const DenseVector est = itd::itd_hypergradient(oracle, x, traj, alpha, counters);
  const DenseVector gp = oracle.exact.grad_phi(x);
  CHECK(norm(est - gp) <= 1e-6 * (1.0 + norm(gp)));
}

TEST_CASE("reverse accumulation equals the explicit sum of products") {
  Xoshiro256 rng(43);
  SUBCASE("random quadratics") {
    for (std::size_t n = 1; n <= 6; ++n) {
      const BilevelOracle oracle =
          make_seeded_quadratic(2 + n % 3, 2 + (n + 1) % 4, 5.0, 500 + n);
      const DenseVector x = random_vec(rng, oracle.dim_x);
      const DenseVector y0 = random_vec(rng, oracle.dim_y);
      const double alpha = 1.0 / oracle.constants.L;
      CostCounters counters;
      const itd::Trajectory traj =
          itd::inner_gd_with_trajectory(oracle, x, y0, n, alpha, counters);
      const DenseVector fast = itd::itd_hypergradient(oracle, x, traj, alpha, counters);
      const DenseVector slow = explicit_sum_of_products(oracle, x, traj, alpha);
      CHECK(norm(fast - slow) <= 1e-12);
    }
  }
  SUBCASE("state-dependent Hessians") {
    for (std::size_t n = 1; n <= 6; ++n) {
      const BilevelOracle oracle = quartic_instance(3, 4, 600 + n);
      const DenseVector x = random_vec(rng, 3, 0.5);
      const DenseVector y0 = random_vec(rng, 4, 0.5);
      const double alpha = 0.15;
      CostCounters counters;
      const itd::Trajectory traj =
          itd::inner_gd_with_trajectory(oracle, x, y0, n, alpha, counters);
      const DenseVector fast = itd::itd_hypergradient(oracle, x, traj, alpha, counters);
      const DenseVector slow = explicit_sum_of_products(oracle, x, traj, alpha);
      CHECK(norm(fast - slow) <= 1e-12);
    }
  }
}

TEST_CASE("itd gradient matches finite differences of the truncated objective") {
  Xoshiro256 rng(44);
  auto fd_check = [&](const BilevelOracle& oracle, std::size_t n, double alpha) {
    const DenseVector x = random_vec(rng, oracle.dim_x, 0.5);
    const DenseVector y0 = DenseVector::zeros(oracle.dim_y);
    CostCounters counters;
    const itd::Trajectory traj =
        itd::inner_gd_with_trajectory(oracle, x, y0, n, alpha, counters);
    const DenseVector grad = itd::itd_hypergradient(oracle, x, traj, alpha, counters);

    const double h = 1e-5;
    DenseVector probe = x;
    DenseVector fd(oracle.dim_x, 0.0);
    for (std::size_t i = 0; i < oracle.dim_x; ++i) {
      const double base = x[i];
      auto value = [&](double at) {
        probe[i] = at;
        CostCounters scratch;
        const itd::Trajectory path =
            itd::inner_gd_with_trajectory(oracle, probe, y0, n, alpha, scratch);
        return oracle.f_value(probe, path.last());
      };
      const double plus = value(base + h);
      const double minus = value(base - h);
      probe[i] = base;
      fd[i] = (plus - minus) / (2.0 * h);
    }
    CHECK(norm(grad - fd) <= 1e-5 * (1.0 + norm(fd)));
  };

  const BilevelOracle quad = make_seeded_quadratic(4, 4, 10.0, 45);
  fd_check(quad, 6, 1.0 / quad.constants.L);

  HyperRepresentationDims dims;
  dims.train_rows = 16;
  dims.val_rows = 8;
  dims.features = 4;
  dims.rep_dim = 2;
  const BilevelOracle rep = make_hyper_representation(dims, 0.5, 46);
  fd_check(rep, 5, 1.0 / rep.constants.L);
}

TEST_CASE("trajectory and hypergradient must share (x, alpha)") {
  const BilevelOracle oracle = make_seeded_quadratic(3, 3, 5.0, 47);
  Xoshiro256 rng(48);
  const DenseVector x = random_vec(rng, 3);
  CostCounters counters;
  const itd::Trajectory traj = itd::inner_gd_with_trajectory(
      oracle, x, DenseVector::zeros(3), 3, 0.1, counters);
  CHECK_THROWS_AS(itd::itd_hypergradient(oracle, random_vec(rng, 3), traj, 0.1, counters),
                  ContractViolation);
  CHECK_THROWS_AS(itd::itd_hypergradient(oracle, x, traj, 0.2, counters),
                  ContractViolation);
}

TEST_CASE("run_itd counter identities") {
  const BilevelOracle oracle = make_seeded_quadratic(3, 4, 6.0, 49);
  itd::ItdConfig config;
  config.N = 7;
  config.K = 9;
  config.alpha = 1.0 / oracle.constants.L;
  config.beta = 0.01;
  config.x0 = DenseVector::zeros(3);
  config.y0 = DenseVector::zeros(4);
  const RunTrace trace = itd::run_itd(oracle, config);
  CHECK(trace.records.size() == config.K);
  CHECK(trace.records.back().gc_cum == config.K * (config.N + 2));
  CHECK(trace.records.back().mv_cum == 2 * config.K * config.N);
}

TEST_CASE("run_itd with beta = 0 keeps the iterate") {
  const BilevelOracle oracle = make_seeded_quadratic(2, 2, 4.0, 50);
  itd::ItdConfig config;
  config.N = 2;
  config.K = 1;
  config.alpha = 1.0 / oracle.constants.L;
  config.beta = 0.0;
  config.x0 = DenseVector{0.3, -0.4};
  config.y0 = DenseVector::zeros(2);
  const RunTrace trace = itd::run_itd(oracle, config);
  CHECK(trace.final_x == config.x0);
}

TEST_CASE("run_itd settles at the worst-case residual") {
  const BilevelOracle oracle = make_lower_bound_instance(2.0, 1.0, 1.0);
  itd::ItdConfig config;
  config.N = 1;
  config.K = 5000;
  config.alpha = 0.25;
  config.beta = 0.5 / analysis::smoothness_constant(oracle.constants);
  config.x0 = DenseVector::ones(2);
  config.y0 = DenseVector::zeros(2);
  const RunTrace trace = itd::run_itd(oracle, config);
  CHECK(*trace.final_grad_true_norm_sq == doctest::Approx(2.5).epsilon(1e-7));

  itd::ItdConfig deep = config;
  deep.N = 60;
  const RunTrace deep_trace = itd::run_itd(oracle, deep);
  CHECK(*deep_trace.final_grad_true_norm_sq <= 1e-10);
}

TEST_CASE("itd_floor lower-bounds every iterate on the worst-case instance") {
  const double construct_l = 2.0, construct_mu = 1.0, construct_m = 1.0;
  const BilevelOracle oracle =
      make_lower_bound_instance(construct_l, construct_mu, construct_m);
  struct Setup {
    double alpha;
    std::size_t n;
  };
  for (const Setup setup : {Setup{0.25, 1}, Setup{0.1, 3}, Setup{0.3, 8}}) {
    itd::ItdConfig config;
    config.N = setup.n;
    config.K = 800;
    config.alpha = setup.alpha;
    config.beta = 0.5 / analysis::smoothness_constant(oracle.constants);
    config.x0 = DenseVector::ones(2);
    config.y0 = DenseVector::zeros(2);
    const RunTrace trace = itd::run_itd(oracle, config);
    const double floor =
        analysis::itd_floor(construct_l, construct_mu, construct_m, setup.alpha, setup.n);
    for (const TraceRecord& rec : trace.records) {
      CHECK(*rec.grad_true_norm_sq >= floor - 1e-9);
    }
  }
}

TEST_CASE("two identical runs produce identical traces") {
  const BilevelOracle oracle = make_seeded_quadratic(3, 3, 6.0, 51);
  itd::ItdConfig config;
  config.N = 5;
  config.K = 30;
  config.alpha = 1.0 / oracle.constants.L;
  config.beta = 0.02;
  config.x0 = DenseVector(3, 0.2);
  config.y0 = DenseVector::zeros(3);
  const RunTrace a = itd::run_itd(oracle, config);
  const RunTrace b = itd::run_itd(oracle, config);
  CHECK(a.final_x == b.final_x);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].grad_est_norm_sq == b.records[i].grad_est_norm_sq);
  }
}

}  // TEST_SUITE
