#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "biloop/analysis.hpp"
#include "biloop/oracle.hpp"

namespace biloop::harness {

// Declarative experiment description, read from a flat key-value document:
// one `dotted.key = value` per line, `#` starts a comment. The exact grammar
// is documented in the README. Stepsizes left unset (or set to `default`)
// are filled from the scheme's scheme defaults; explicit numbers win
// field by field.
struct ExperimentConfig {
  std::string problem_name;                      // problem.name
  std::uint64_t seed = 1;                        // problem.seed
  std::map<std::string, double> problem_params;  // remaining problem.* keys

  analysis::Algorithm algorithm = analysis::Algorithm::aid;  // algorithm
  std::optional<analysis::SchemeId> scheme;                  // scheme
  std::optional<std::size_t> loops_n;                        // loops.N
  std::optional<std::size_t> loops_q;                        // loops.Q
  std::optional<double> alpha;                               // step.alpha
  std::optional<double> eta;                                 // step.eta
  std::optional<double> beta;                                // step.beta

  std::size_t iterations = 100;   // run.K
  double epsilon = 1e-6;          // run.epsilon
  std::size_t trace_stride = 1;   // run.trace_stride
  bool warm_start_y = true;       // warm_start.y
  bool warm_start_v = true;       // warm_start.v
  std::string x0_init = "zeros";  // init.x0: zeros | ones | comma list
  std::string y0_init = "zeros";  // init.y0
  std::string v0_init = "zeros";  // init.v0

  std::string output_path;  // output.path; empty = no CSV file
  bool timing = false;      // output.timing

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// Serialization round-trips: parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

// Instantiates the configured problem oracle (seeded, deterministic).
BilevelOracle build_problem(const ExperimentConfig& config);

// Turns an init spec ("zeros", "ones", or a comma list) into a vector.
DenseVector make_init_vector(const std::string& spec, std::size_t dim,
                             const std::string& field);

const char* algorithm_name(analysis::Algorithm algorithm);

analysis::SchemeId parse_scheme_name(const std::string& name);

}  // namespace biloop::harness
