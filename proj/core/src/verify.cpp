#include "biloop/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "biloop/aid.hpp"
#include "biloop/analysis.hpp"
#include "biloop/errors.hpp"
#include "biloop/experiment.hpp"
#include "biloop/itd.hpp"
#include "biloop/problems.hpp"
#include "biloop/rng.hpp"

namespace biloop::verify {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6e", v);
  return buf;
}

double relative_error(const DenseVector& got, const DenseVector& want) {
  const double scale = std::max(norm(want), 1e-300);
  return norm(got - want) / scale;
}

DenseVector random_vector(Xoshiro256& rng, std::size_t dim, double scale) {
  DenseVector v(dim);
  for (std::size_t i = 0; i < dim; ++i) v[i] = scale * rng.normal();
  return v;
}

DenseMatrix probe_inner_hessian(const BilevelOracle& oracle, const DenseVector& x,
                                const DenseVector& y) {
  const std::size_t q = oracle.dim_y;
  DenseMatrix h(q, q, 0.0);
  for (std::size_t j = 0; j < q; ++j) {
    DenseVector e(q, 0.0);
    e[j] = 1.0;
    const DenseVector col = oracle.hvp_yy_g(x, y, e);
    for (std::size_t i = 0; i < q; ++i) h(i, j) = col[i];
  }
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = i + 1; j < q; ++j) {
      const double avg = 0.5 * (h(i, j) + h(j, i));
      h(i, j) = avg;
      h(j, i) = avg;
    }
  }
  return h;
}

DenseMatrix probe_cross_jacobian(const BilevelOracle& oracle, const DenseVector& x,
                                 const DenseVector& y) {
  DenseMatrix j(oracle.dim_x, oracle.dim_y, 0.0);
  for (std::size_t col = 0; col < oracle.dim_y; ++col) {
    DenseVector e(oracle.dim_y, 0.0);
    e[col] = 1.0;
    const DenseVector out = oracle.jvp_xy_g(x, y, e);
    for (std::size_t row = 0; row < oracle.dim_x; ++row) j(row, col) = out[row];
  }
  return j;
}

// --- criterion 1: AID hypergradient with exact sub-solutions equals the
// --- closed-form hypergradient.
CriterionResult criterion_hypergradient_exactness() {
  CriterionResult result{"hypergradient_exactness", false, ""};
  const BilevelOracle oracle = problems::make_seeded_quadratic(5, 5, 10.0, 71);
  Xoshiro256 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const DenseVector x = random_vector(rng, oracle.dim_x, 1.0);
    const DenseVector y_star = oracle.exact.y_star(x);
    const DenseVector v_star = oracle.exact.v_star(x);
    CostCounters counters;
    const DenseVector est = aid::aid_hypergradient(oracle, x, y_star, v_star, counters);
    worst = std::max(worst, relative_error(est, oracle.exact.grad_phi(x)));
  }
  result.passed = worst <= 1e-10;
  result.details = "max_rel=" + fmt(worst) + " tol=1.0e-10 over 20 random x";
  return result;
}

// --- criterion 2: reverse accumulation equals (a) the explicitly assembled
// --- sum-of-products form and (b) central finite differences of
// --- x -> f(x, y^N(x)) at fixed y^0.
CriterionResult criterion_itd_correctness() {
  CriterionResult result{"itd_correctness", false, ""};
  Xoshiro256 rng(202);

  // Independent referee: probe the Hessians and cross Jacobians into dense
  // matrices along the path and assemble the chain-rule sum directly.
  double worst_abs = 0.0;
  auto sum_of_products_error = [&](const BilevelOracle& oracle, std::size_t n) {
    const DenseVector x = random_vector(rng, oracle.dim_x, 0.7);
    const DenseVector y0 = random_vector(rng, oracle.dim_y, 0.7);
    const double alpha = 1.0 / oracle.constants.L;
    CostCounters counters;
    const itd::Trajectory traj =
        itd::inner_gd_with_trajectory(oracle, x, y0, n, alpha, counters);
    const DenseVector fast = itd::itd_hypergradient(oracle, x, traj, alpha, counters);

    const DenseVector gf = oracle.grad_y_f(x, traj.last());
    DenseVector acc(oracle.dim_x, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      DenseVector w = gf;
      for (std::size_t j = n; j-- > t + 1;) {
        const DenseMatrix h = probe_inner_hessian(oracle, x, traj.point(j));
        w = w - alpha * matvec(h, w);
      }
      const DenseMatrix jac = probe_cross_jacobian(oracle, x, traj.point(t));
      acc = acc + matvec(jac, w);
    }
    const DenseVector slow = oracle.grad_x_f(x, traj.last()) - alpha * acc;
    return norm(fast - slow);
  };

  for (std::size_t n = 1; n <= 6; ++n) {
    const BilevelOracle quad = problems::make_seeded_quadratic(
        2 + n % 3, 2 + (n + 1) % 4, 4.0 + static_cast<double>(n), 300 + n);
    worst_abs = std::max(worst_abs, sum_of_products_error(quad, n));
  }
  {
    // Logistic inner problem: the Hessian genuinely varies along the path.
    problems::HyperCleaningDims dims;
    dims.samples = 24;
    dims.features = 4;
    const BilevelOracle clean = problems::make_hyper_cleaning(dims, 0.1, 404);
    for (std::size_t n = 2; n <= 6; n += 2) {
      worst_abs = std::max(worst_abs, sum_of_products_error(clean, n));
    }
  }

  // (b) finite differences of the truncated objective.
  double worst_rel = 0.0;
  auto fd_error = [&](const BilevelOracle& oracle, std::size_t n) {
    const DenseVector x = random_vector(rng, oracle.dim_x, 0.5);
    const DenseVector y0(oracle.dim_y, 0.0);
    const double alpha = 1.0 / oracle.constants.L;
    CostCounters counters;
    const itd::Trajectory traj =
        itd::inner_gd_with_trajectory(oracle, x, y0, n, alpha, counters);
    const DenseVector grad = itd::itd_hypergradient(oracle, x, traj, alpha, counters);

    const double h = 1e-5;
    DenseVector fd(oracle.dim_x, 0.0);
    DenseVector probe = x;
    for (std::size_t i = 0; i < oracle.dim_x; ++i) {
      const double base = x[i];
      auto truncated_phi = [&](double value) {
        probe[i] = value;
        CostCounters scratch;
        const itd::Trajectory path =
            itd::inner_gd_with_trajectory(oracle, probe, y0, n, alpha, scratch);
        return oracle.f_value(probe, path.last());
      };
      const double plus = truncated_phi(base + h);
      const double minus = truncated_phi(base - h);
      probe[i] = base;
      fd[i] = (plus - minus) / (2.0 * h);
    }
    return relative_error(grad, fd);
  };

  const BilevelOracle quad = problems::make_seeded_quadratic(5, 5, 10.0, 71);
  worst_rel = std::max(worst_rel, fd_error(quad, 5));
  problems::HyperRepresentationDims rep_dims;
  rep_dims.train_rows = 24;
  rep_dims.val_rows = 12;
  rep_dims.features = 4;
  rep_dims.rep_dim = 2;
  const BilevelOracle rep = problems::make_hyper_representation(rep_dims, 0.5, 505);
  worst_rel = std::max(worst_rel, fd_error(rep, 5));

  result.passed = worst_abs <= 1e-12 && worst_rel <= 1e-5;
  result.details = "sum_of_products_abs=" + fmt(worst_abs) +
                   " (tol 1.0e-12), fd_rel=" + fmt(worst_rel) + " (tol 1.0e-5)";
  return result;
}

// --- criterion 3: hypergradient error decays geometrically in N with the
// --- inner contraction rate when the linear system is solved exactly.
CriterionResult criterion_geometric_decay() {
  CriterionResult result{"geometric_decay", false, ""};
  const BilevelOracle oracle = problems::make_seeded_quadratic(5, 5, 10.0, 71);
  Xoshiro256 rng(303);
  const DenseVector x = random_vector(rng, oracle.dim_x, 1.0);
  const DenseVector y_star = oracle.exact.y_star(x);
  const DenseVector grad_phi = oracle.exact.grad_phi(x);

  // Start the inner loop along the slowest Hessian mode so the fit reads the
  // (1 - alpha mu) rate; generic components only add faster-decaying terms.
  const DenseMatrix hess = probe_inner_hessian(oracle, x, y_star);
  DenseVector mode = DenseVector::ones(oracle.dim_y);
  for (int it = 0; it < 300; ++it) {
    mode = solve_spd(hess, mode);
    mode = (1.0 / norm(mode)) * mode;
  }
  const DenseVector y0 = y_star + mode;

  const double alpha = 1.0 / oracle.constants.L;
  const double alpha_mu = alpha * oracle.constants.mu;
  std::vector<double> log_err;
  for (std::size_t n = 1; n <= 50; ++n) {
    CostCounters counters;
    const DenseVector y_n = aid::inner_gd(oracle, x, y0, n, alpha, counters);
    const DenseVector v =
        solve_spd(probe_inner_hessian(oracle, x, y_n), oracle.grad_y_f(x, y_n));
    const DenseVector est = aid::aid_hypergradient(oracle, x, y_n, v, counters);
    const double err = norm(est - grad_phi);
    if (err <= 0.0) {
      result.details = "error hit zero at N=" + std::to_string(n);
      return result;
    }
    log_err.push_back(std::log(err));
  }

  // Least-squares slope of log error against N.
  const double count = static_cast<double>(log_err.size());
  double mean_n = 0.0, mean_e = 0.0;
  for (std::size_t i = 0; i < log_err.size(); ++i) {
    mean_n += static_cast<double>(i + 1);
    mean_e += log_err[i];
  }
  mean_n /= count;
  mean_e /= count;
  double cov = 0.0, var = 0.0;
  for (std::size_t i = 0; i < log_err.size(); ++i) {
    const double dn = static_cast<double>(i + 1) - mean_n;
    cov += dn * (log_err[i] - mean_e);
    var += dn * dn;
  }
  const double slope = cov / var;
  const double target = std::log(1.0 - alpha_mu);
  const double deviation = std::abs(slope - target) / std::abs(target);

  result.passed = deviation <= 0.10;
  result.details = "slope=" + fmt(slope) + " target=ln(1-alpha*mu)=" + fmt(target) +
                   " rel_dev=" + fmt(deviation) + " (tol 0.10)";
  return result;
}

// --- criterion 4: ITD residual floor on the worst-case instance.
CriterionResult criterion_lower_bound_floor() {
  CriterionResult result{"lower_bound_floor", false, ""};
  const double cons_l = 2.0, cons_mu = 1.0, cons_m = 1.0, alpha = 0.25;
  const BilevelOracle oracle = problems::make_lower_bound_instance(cons_l, cons_mu, cons_m);
  const double l_phi = analysis::smoothness_constant(oracle.constants);
  const double beta = 0.5 / l_phi;  // satisfies beta <= 1/L_phi

  itd::ItdConfig config;
  config.N = 1;
  config.K = 5000;
  config.alpha = alpha;
  config.beta = beta;
  config.x0 = DenseVector::ones(2);
  config.y0 = DenseVector::zeros(2);
  const RunTrace trace = itd::run_itd(oracle, config);

  const double floor = analysis::itd_floor(cons_l, cons_mu, cons_m, alpha, config.N);
  double min_seen = *trace.records.front().grad_true_norm_sq;
  bool floor_held = true;
  for (const TraceRecord& rec : trace.records) {
    const double v = *rec.grad_true_norm_sq;
    min_seen = std::min(min_seen, v);
    if (v < floor - 1e-9) floor_held = false;
  }
  const double final_residual = *trace.final_grad_true_norm_sq;
  const bool residual_ok = std::abs(final_residual - 2.5) <= 1e-6;
  if (final_residual < floor - 1e-9) floor_held = false;

  itd::ItdConfig deep = config;
  deep.N = 60;
  const RunTrace deep_trace = itd::run_itd(oracle, deep);
  const double deep_floor = analysis::itd_floor(cons_l, cons_mu, cons_m, alpha, deep.N);
  const double deep_final = *deep_trace.final_grad_true_norm_sq;
  const bool deep_ok = deep_final <= 1e-10 && deep_final >= deep_floor - 1e-9;

  result.passed = floor_held && residual_ok && deep_ok;
  result.details = "N=1: floor=" + fmt(floor) + " min_seen=" + fmt(min_seen) +
                   " final=" + fmt(final_residual) + " (want 2.5 +- 1e-6); N=60: final=" +
                   fmt(deep_final) + " <= 1e-10, floor=" + fmt(deep_floor);
  return result;
}

// --- criterion 5: exact gc/mv tallies.
CriterionResult criterion_counter_identities() {
  CriterionResult result{"counter_identities", false, ""};
  const BilevelOracle oracle = problems::make_seeded_quadratic(3, 4, 8.0, 99);

  aid::LoopConfig aid_config;
  aid_config.N = 3;
  aid_config.Q = 4;
  aid_config.K = 7;
  aid_config.alpha = 1.0 / oracle.constants.L;
  aid_config.eta = aid_config.alpha;
  aid_config.beta = 0.5 / analysis::smoothness_constant(oracle.constants);
  aid_config.x0 = DenseVector::zeros(oracle.dim_x);
  aid_config.y0 = DenseVector::zeros(oracle.dim_y);
  aid_config.v0 = DenseVector::zeros(oracle.dim_y);
  const RunTrace aid_trace = aid::run_aid(oracle, aid_config);
  const std::uint64_t aid_gc = aid_trace.records.back().gc_cum;
  const std::uint64_t aid_mv = aid_trace.records.back().mv_cum;
  const bool aid_ok = aid_gc == aid_config.K * (aid_config.N + 2) &&
                      aid_mv == aid_config.K * (aid_config.Q + 1);

  itd::ItdConfig itd_config;
  itd_config.N = 5;
  itd_config.K = 6;
  itd_config.alpha = 1.0 / oracle.constants.L;
  itd_config.beta = aid_config.beta;
  itd_config.x0 = DenseVector::zeros(oracle.dim_x);
  itd_config.y0 = DenseVector::zeros(oracle.dim_y);
  const RunTrace itd_trace = itd::run_itd(oracle, itd_config);
  const std::uint64_t itd_gc = itd_trace.records.back().gc_cum;
  const std::uint64_t itd_mv = itd_trace.records.back().mv_cum;
  const bool itd_ok = itd_gc == itd_config.K * (itd_config.N + 2) &&
                      itd_mv == 2 * itd_config.K * itd_config.N;

  result.passed = aid_ok && itd_ok;
  result.details = "aid: gc=" + std::to_string(aid_gc) + " want K(N+2)=" +
                   std::to_string(aid_config.K * (aid_config.N + 2)) + ", mv=" +
                   std::to_string(aid_mv) + " want K(Q+1)=" +
                   std::to_string(aid_config.K * (aid_config.Q + 1)) +
                   "; itd: gc=" + std::to_string(itd_gc) + " want " +
                   std::to_string(itd_config.K * (itd_config.N + 2)) + ", mv=" +
                   std::to_string(itd_mv) + " want 2KN=" +
                   std::to_string(2 * itd_config.K * itd_config.N);
  return result;
}

struct SchemeRun {
  std::optional<std::size_t> k_to_eps;
  std::uint64_t mv_at_eps = 0;
  double min_true = 0.0;
};

SchemeRun first_crossing(const RunTrace& trace, double epsilon) {
  SchemeRun run;
  bool first = true;
  for (const TraceRecord& rec : trace.records) {
    const double v = *rec.grad_true_norm_sq;
    if (first || v < run.min_true) run.min_true = v;
    first = false;
    if (!run.k_to_eps && v <= epsilon) {
      run.k_to_eps = rec.k;
      run.mv_at_eps = rec.mv_cum;
    }
  }
  return run;
}

// --- criterion 6: qualitative loop-scheme ordering at kappa = 100.
// Each scheme runs at its own workable outer stepsize, mirroring the
// per-scheme prescriptions: the large-N schemes tolerate beta = 4e-3 on this
// instance, while no-loop AID stalls near 3e-4 there and needs beta = 2e-3
// (hence more iterations) to reach epsilon at all.
CriterionResult criterion_scheme_ordering() {
  CriterionResult result{"scheme_ordering", false, ""};
  const double epsilon = 1e-6;
  const BilevelOracle oracle = problems::make_seeded_quadratic(4, 4, 100.0, 2024);
  const AssumptionConstants& c = oracle.constants;
  const double alpha = 1.0 / c.L;

  const analysis::HyperparamDefaults n_loop = analysis::default_hyperparams(
      analysis::Algorithm::aid, analysis::SchemeId::n_loop, c, epsilon);

  aid::LoopConfig base;
  base.alpha = alpha;
  base.eta = alpha;
  base.x0 = DenseVector(oracle.dim_x, 0.1);
  base.y0 = DenseVector::zeros(oracle.dim_y);
  base.v0 = DenseVector::zeros(oracle.dim_y);

  aid::LoopConfig with_n_loop = base;
  with_n_loop.N = n_loop.N;  // ceil(kappa ln kappa)
  with_n_loop.Q = 1;
  with_n_loop.beta = 4e-3;
  with_n_loop.K = 2600;
  const SchemeRun n_loop_run = first_crossing(aid::run_aid(oracle, with_n_loop), epsilon);

  aid::LoopConfig no_loop = base;
  no_loop.N = 1;
  no_loop.Q = 1;
  no_loop.beta = 2e-3;
  no_loop.K = 5200;
  const SchemeRun no_loop_run = first_crossing(aid::run_aid(oracle, no_loop), epsilon);

  const analysis::HyperparamDefaults nn = analysis::default_hyperparams(
      analysis::Algorithm::itd, analysis::SchemeId::nn_loop, c, epsilon);
  itd::ItdConfig itd_config;
  itd_config.N = nn.N;  // ceil(kappa ln(kappa/epsilon))
  itd_config.K = 2600;
  itd_config.alpha = alpha;
  itd_config.beta = 4e-3;
  itd_config.x0 = base.x0;
  itd_config.y0 = base.y0;
  const SchemeRun itd_run = first_crossing(itd::run_itd(oracle, itd_config), epsilon);

  // ITD no-loop on the worst-case instance: epsilon sits below the floor.
  const BilevelOracle worst = problems::make_lower_bound_instance(2.0, 1.0, 1.0);
  itd::ItdConfig never;
  never.N = 1;
  never.K = 2000;
  never.alpha = 0.25;
  never.beta = 0.5 / analysis::smoothness_constant(worst.constants);
  never.x0 = DenseVector::ones(2);
  never.y0 = DenseVector::zeros(2);
  const SchemeRun never_run = first_crossing(itd::run_itd(worst, never), epsilon);

  const bool aid_both_reach =
      n_loop_run.k_to_eps.has_value() && no_loop_run.k_to_eps.has_value();
  const bool mv_ordered = aid_both_reach && n_loop_run.mv_at_eps < no_loop_run.mv_at_eps;
  const bool itd_reaches = itd_run.k_to_eps.has_value();
  const bool itd_never = !never_run.k_to_eps.has_value();

  result.passed = aid_both_reach && mv_ordered && itd_reaches && itd_never;
  auto k_str = [](const SchemeRun& r) {
    return r.k_to_eps ? std::to_string(*r.k_to_eps) : std::string("not reached");
  };
  result.details = "aid n-loop: k=" + k_str(n_loop_run) + " MV=" +
                   std::to_string(n_loop_run.mv_at_eps) + "; aid no-loop: k=" +
                   k_str(no_loop_run) + " MV=" + std::to_string(no_loop_run.mv_at_eps) +
                   "; itd n-n-loop: k=" + k_str(itd_run) +
                   "; itd no-loop on worst case: " +
                   (itd_never ? "never reaches (min " + fmt(never_run.min_true) + ")"
                              : "reached unexpectedly");
  return result;
}

// --- criterion 7: inner-loop size gap on the hyper-representation problem.
CriterionResult criterion_hyper_representation_gap() {
  CriterionResult result{"hyper_representation_gap", false, ""};
  problems::HyperRepresentationDims dims;
  dims.train_rows = 40;
  dims.val_rows = 20;
  dims.features = 4;
  dims.rep_dim = 2;
  const BilevelOracle oracle = problems::make_hyper_representation(dims, 0.1, 777);

  const double alpha = 1.0 / oracle.constants.L;
  const double beta = 11.0;  // tuned for this seeded instance; stable for both runs
  Xoshiro256 rng(778);
  const DenseVector x0 = random_vector(rng, oracle.dim_x, 0.25);

  auto validation_loss_at = [&](std::size_t n, std::size_t iterations) {
    DenseVector x = x0;
    DenseVector y = DenseVector::zeros(oracle.dim_y);
    CostCounters counters;
    for (std::size_t k = 0; k < iterations; ++k) {
      const itd::Trajectory traj =
          itd::inner_gd_with_trajectory(oracle, x, y, n, alpha, counters);
      const DenseVector grad = itd::itd_hypergradient(oracle, x, traj, alpha, counters);
      axpy(-beta, grad, x);
      y = traj.last();
    }
    const itd::Trajectory traj =
        itd::inner_gd_with_trajectory(oracle, x, y, n, alpha, counters);
    return oracle.f_value(x, traj.last());
  };

  const double loss_deep = validation_loss_at(20, 500);
  const double loss_shallow = validation_loss_at(1, 500);

  result.passed = loss_deep <= 0.1 * loss_shallow;
  result.details = "loss(N=20)=" + fmt(loss_deep) + " loss(N=1)=" + fmt(loss_shallow) +
                   " ratio=" + fmt(loss_deep / loss_shallow) + " (need <= 0.1)";
  return result;
}

// --- criterion 8: bit-level determinism of seeded runs and of the report.
CriterionResult criterion_determinism() {
  CriterionResult result{"determinism", false, ""};

  harness::ExperimentConfig config;
  config.problem_name = "lower_bound";
  config.problem_params = {{"L", 2.0}, {"mu", 1.0}, {"M", 1.0}};
  config.algorithm = analysis::Algorithm::itd;
  config.loops_n = 1;
  config.alpha = 0.25;
  config.beta = 1.0 / 36.0;
  config.iterations = 300;
  config.epsilon = 1e-3;
  config.x0_init = "ones";

  const std::string csv_a = trace_csv_string(harness::run_experiment(config).trace);
  const std::string csv_b = trace_csv_string(harness::run_experiment(config).trace);
  const bool csv_identical = csv_a == csv_b;

  // Recompute a cheap criterion twice from scratch; its rendered line must
  // match byte for byte.
  const CriterionResult line_a = criterion_hypergradient_exactness();
  const CriterionResult line_b = criterion_hypergradient_exactness();
  const bool report_identical =
      line_a.details == line_b.details && line_a.passed == line_b.passed;

  result.passed = csv_identical && report_identical;
  result.details = std::string("csv bytes ") +
                   (csv_identical ? "identical" : "DIFFER") + " (" +
                   std::to_string(csv_a.size()) + " bytes), repeated report line " +
                   (report_identical ? "identical" : "DIFFERS");
  return result;
}

}  // namespace

std::vector<CriterionResult> run_verification(const std::string& filter) {
  using Entry = std::pair<const char*, std::function<CriterionResult()>>;
  const std::vector<Entry> criteria = {
      {"hypergradient_exactness", criterion_hypergradient_exactness},
      {"itd_correctness", criterion_itd_correctness},
      {"geometric_decay", criterion_geometric_decay},
      {"lower_bound_floor", criterion_lower_bound_floor},
      {"counter_identities", criterion_counter_identities},
      {"scheme_ordering", criterion_scheme_ordering},
      {"hyper_representation_gap", criterion_hyper_representation_gap},
      {"determinism", criterion_determinism},
  };

  std::vector<CriterionResult> results;
  for (const auto& [name, run] : criteria) {
    if (!filter.empty() && std::string(name).find(filter) == std::string::npos) continue;
    try {
      results.push_back(run());
    } catch (const std::exception& err) {
      results.push_back({name, false, std::string("exception: ") + err.what()});
    }
  }
  return results;
}

std::string render_report(const std::vector<CriterionResult>& results) {
  std::ostringstream out;
  for (const CriterionResult& r : results) {
    out << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.details << '\n';
  }
  return out.str();
}

bool all_passed(const std::vector<CriterionResult>& results) {
  for (const CriterionResult& r : results) {
    if (!r.passed) return false;
  }
  return !results.empty();
}

}  // namespace biloop::verify
