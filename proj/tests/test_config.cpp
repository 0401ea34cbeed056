#include <doctest.h>

#include <sstream>

#include "biloop/config.hpp"
#include "biloop/errors.hpp"
#include "biloop/trace.hpp"

using namespace biloop;
using namespace biloop::harness;

namespace {

const char* kSampleConfig = R"(# lower-bound ITD probe
problem.name = lower_bound
problem.seed = 7
problem.L = 2.0
problem.mu = 1.0
problem.M = 1.0
algorithm = itd
loops.N = 1
step.alpha = 0.25
step.beta = default
run.K = 40
run.epsilon = 1e-3
run.trace_stride = 2
warm_start.y = true
init.x0 = ones
output.timing = false
)";

}  // namespace

TEST_SUITE("config") {

TEST_CASE("parsing a documented config") {
  const ExperimentConfig config = parse_config(kSampleConfig);
  CHECK(config.problem_name == "lower_bound");
  CHECK(config.seed == 7);
  CHECK(config.problem_params.at("L") == 2.0);
  CHECK(config.algorithm == analysis::Algorithm::itd);
  CHECK(config.loops_n == 1);
  CHECK_FALSE(config.loops_q.has_value());
  CHECK(config.alpha == 0.25);
  CHECK_FALSE(config.beta.has_value());  // "default" defers to the scheme rule
  CHECK(config.iterations == 40);
  CHECK(config.epsilon == 1e-3);
  CHECK(config.trace_stride == 2);
  CHECK(config.x0_init == "ones");
}

TEST_CASE("round trip preserves the configuration") {
  const ExperimentConfig parsed = parse_config(kSampleConfig);
  const ExperimentConfig again = parse_config(serialize_config(parsed));
  CHECK(parsed == again);
  // and serialization is a fixed point afterwards
  CHECK(serialize_config(parsed) == serialize_config(again));
}

TEST_CASE("errors name the offending field") {
  CHECK_THROWS_WITH_AS(parse_config("problem.name = quadratic\nrun.K = three\n"),
                       doctest::Contains("run.K"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("problem.name = quadratic\nscheme = superloop\n"),
                       doctest::Contains("scheme"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("problem.name = quadratic\nwhatever = 1\n"),
                       doctest::Contains("whatever"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("run.K = 5\n"), doctest::Contains("problem.name"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config("problem.name = quadratic\nrun.epsilon = -1.0\n"),
      doctest::Contains("run.epsilon"), ConfigError);
}

TEST_CASE("unknown problem is a config error") {
  ExperimentConfig config;
  config.problem_name = "simplex";
  CHECK_THROWS_WITH_AS(build_problem(config), doctest::Contains("simplex"), ConfigError);
}

TEST_CASE("init vector specs") {
  CHECK(make_init_vector("zeros", 3, "init.x0") == DenseVector::zeros(3));
  CHECK(make_init_vector("ones", 2, "init.y0") == DenseVector::ones(2));
  CHECK(make_init_vector("0.5, -1.5", 2, "init.v0") == DenseVector{0.5, -1.5});
  CHECK_THROWS_WITH_AS(make_init_vector("1,2,3", 2, "init.x0"),
                       doctest::Contains("init.x0"), ConfigError);
}

TEST_CASE("csv schema and empty reference cells") {
  RunTrace trace;
  trace.final_x = DenseVector{0.0};
  for (std::size_t k = 0; k < 3; ++k) {
    TraceRecord rec;
    rec.k = k;
    rec.grad_est_norm_sq = 0.5 * static_cast<double>(k + 1);
    if (k % 2 == 0) rec.grad_true_norm_sq = 0.25;
    rec.gc_cum = 3 * (k + 1);
    rec.mv_cum = 2 * (k + 1);
    trace.records.push_back(rec);
  }
  const std::string csv = trace_csv_string(trace);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "k,grad_est_norm_sq,grad_true_norm_sq,gc_cum,mv_cum,wall_ms");
  std::getline(lines, line);
  CHECK(line == "0,0.5,0.25,3,2,");
  std::getline(lines, line);
  CHECK(line == "1,1,,6,4,");  // empty cell, not zero, where no reference exists
  std::getline(lines, line);
  CHECK(line == "2,1.5,0.25,9,6,");
  CHECK_FALSE(std::getline(lines, line));
}

TEST_CASE("doubles round-trip through the csv format") {
  RunTrace trace;
  trace.final_x = DenseVector{0.0};
  TraceRecord rec;
  rec.k = 0;
  rec.grad_est_norm_sq = 0.1 + 0.2;  // not exactly representable
  rec.grad_true_norm_sq = 1.0 / 3.0;
  trace.records.push_back(rec);
  const std::string csv = trace_csv_string(trace);
  double est = 0.0, truth = 0.0;
  std::sscanf(csv.c_str(), "k,grad_est_norm_sq,grad_true_norm_sq,gc_cum,mv_cum,wall_ms\n0,%lf,%lf",
              &est, &truth);
  CHECK(est == 0.1 + 0.2);
  CHECK(truth == 1.0 / 3.0);
}

}  // TEST_SUITE
