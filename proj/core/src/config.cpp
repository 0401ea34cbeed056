#include "biloop/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "biloop/errors.hpp"
#include "biloop/problems.hpp"

namespace biloop::harness {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_number(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("field '" + key + "': expected a number, got '" + value + "'");
  }
}

std::size_t parse_count(const std::string& value, const std::string& key) {
  const double v = parse_number(value, key);
  if (v < 0.0 || v != static_cast<double>(static_cast<std::uint64_t>(v))) {
    throw ConfigError("field '" + key + "': expected a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError("field '" + key + "': expected a boolean, got '" + value + "'");
}

const char* scheme_token(analysis::SchemeId scheme) {
  switch (scheme) {
    case analysis::SchemeId::n_q_loop: return "n_q_loop";
    case analysis::SchemeId::n_loop: return "n_loop";
    case analysis::SchemeId::q_loop: return "q_loop";
    case analysis::SchemeId::no_loop: return "no_loop";
    case analysis::SchemeId::nn_loop: return "nn_loop";
  }
  return "no_loop";
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void apply_stepsize(std::optional<double>& slot, const std::string& value,
                    const std::string& key) {
  if (value == "default" || value == "default") {
    slot.reset();
    return;
  }
  slot = parse_number(value, key);
}

}  // namespace

const char* algorithm_name(analysis::Algorithm algorithm) {
  return algorithm == analysis::Algorithm::aid ? "aid" : "itd";
}

analysis::SchemeId parse_scheme_name(const std::string& name) {
  if (name == "n_q_loop") return analysis::SchemeId::n_q_loop;
  if (name == "n_loop") return analysis::SchemeId::n_loop;
  if (name == "q_loop") return analysis::SchemeId::q_loop;
  if (name == "no_loop") return analysis::SchemeId::no_loop;
  if (name == "nn_loop") return analysis::SchemeId::nn_loop;
  throw ConfigError("field 'scheme': unknown scheme '" + name + "'");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config;
  std::istringstream stream(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key or value");
    }

    if (key == "problem.name") {
      config.problem_name = value;
    } else if (key == "problem.seed") {
      config.seed = static_cast<std::uint64_t>(parse_count(value, key));
    } else if (key.rfind("problem.", 0) == 0) {
      config.problem_params[key.substr(8)] = parse_number(value, key);
    } else if (key == "algorithm") {
      if (value == "aid") {
        config.algorithm = analysis::Algorithm::aid;
      } else if (value == "itd") {
        config.algorithm = analysis::Algorithm::itd;
      } else {
        throw ConfigError("field 'algorithm': expected aid or itd, got '" + value + "'");
      }
    } else if (key == "scheme") {
      config.scheme = parse_scheme_name(value);
    } else if (key == "loops.N") {
      config.loops_n = parse_count(value, key);
    } else if (key == "loops.Q") {
      config.loops_q = parse_count(value, key);
    } else if (key == "step.alpha") {
      apply_stepsize(config.alpha, value, key);
    } else if (key == "step.eta") {
      apply_stepsize(config.eta, value, key);
    } else if (key == "step.beta") {
      apply_stepsize(config.beta, value, key);
    } else if (key == "run.K") {
      config.iterations = parse_count(value, key);
    } else if (key == "run.epsilon") {
      config.epsilon = parse_number(value, key);
    } else if (key == "run.trace_stride") {
      config.trace_stride = parse_count(value, key);
    } else if (key == "warm_start.y") {
      config.warm_start_y = parse_bool(value, key);
    } else if (key == "warm_start.v") {
      config.warm_start_v = parse_bool(value, key);
    } else if (key == "init.x0") {
      config.x0_init = value;
    } else if (key == "init.y0") {
      config.y0_init = value;
    } else if (key == "init.v0") {
      config.v0_init = value;
    } else if (key == "output.path") {
      config.output_path = value;
    } else if (key == "output.timing") {
      config.timing = parse_bool(value, key);
    } else {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown field '" + key + "'");
    }
  }

  if (config.problem_name.empty()) {
    throw ConfigError("field 'problem.name' is required");
  }
  if (!(config.epsilon > 0.0)) {
    throw ConfigError("field 'run.epsilon' must be > 0");
  }
  if (config.trace_stride == 0) {
    throw ConfigError("field 'run.trace_stride' must be positive");
  }
  return config;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string serialize_config(const ExperimentConfig& config) {
  std::ostringstream out;
  out << "problem.name = " << config.problem_name << '\n';
  out << "problem.seed = " << config.seed << '\n';
  for (const auto& [name, value] : config.problem_params) {
    out << "problem." << name << " = " << format_number(value) << '\n';
  }
  out << "algorithm = " << algorithm_name(config.algorithm) << '\n';
  if (config.scheme) out << "scheme = " << scheme_token(*config.scheme) << '\n';
  if (config.loops_n) out << "loops.N = " << *config.loops_n << '\n';
  if (config.loops_q) out << "loops.Q = " << *config.loops_q << '\n';
  out << "step.alpha = " << (config.alpha ? format_number(*config.alpha) : "default") << '\n';
  out << "step.eta = " << (config.eta ? format_number(*config.eta) : "default") << '\n';
  out << "step.beta = " << (config.beta ? format_number(*config.beta) : "default") << '\n';
  out << "run.K = " << config.iterations << '\n';
  out << "run.epsilon = " << format_number(config.epsilon) << '\n';
  out << "run.trace_stride = " << config.trace_stride << '\n';
  out << "warm_start.y = " << (config.warm_start_y ? "true" : "false") << '\n';
  out << "warm_start.v = " << (config.warm_start_v ? "true" : "false") << '\n';
  out << "init.x0 = " << config.x0_init << '\n';
  out << "init.y0 = " << config.y0_init << '\n';
  out << "init.v0 = " << config.v0_init << '\n';
  if (!config.output_path.empty()) out << "output.path = " << config.output_path << '\n';
  out << "output.timing = " << (config.timing ? "true" : "false") << '\n';
  return out.str();
}

BilevelOracle build_problem(const ExperimentConfig& config) {
  const auto& params = config.problem_params;
  auto number = [&](const std::string& name, double fallback) {
    const auto it = params.find(name);
    return it == params.end() ? fallback : it->second;
  };
  auto count = [&](const std::string& name, std::size_t fallback) {
    const auto it = params.find(name);
    if (it == params.end()) return fallback;
    if (it->second < 1.0) {
      throw ConfigError("field 'problem." + name + "' must be a positive integer");
    }
    return static_cast<std::size_t>(it->second);
  };

  if (config.problem_name == "quadratic") {
    return problems::make_seeded_quadratic(count("dim_x", 5), count("dim_y", 5),
                                           number("kappa", 10.0), config.seed);
  }
  if (config.problem_name == "lower_bound") {
    return problems::make_lower_bound_instance(number("L", 2.0), number("mu", 1.0),
                                               number("M", 1.0));
  }
  if (config.problem_name == "hyper_representation") {
    problems::HyperRepresentationDims dims;
    dims.train_rows = count("train_rows", dims.train_rows);
    dims.val_rows = count("val_rows", dims.val_rows);
    dims.features = count("features", dims.features);
    dims.rep_dim = count("rep_dim", dims.rep_dim);
    return problems::make_hyper_representation(dims, number("gamma", 0.1), config.seed);
  }
  if (config.problem_name == "hyper_cleaning") {
    problems::HyperCleaningDims dims;
    dims.samples = count("samples", dims.samples);
    dims.features = count("features", dims.features);
    dims.train_fraction = number("train_fraction", dims.train_fraction);
    dims.val_fraction = number("val_fraction", dims.val_fraction);
    return problems::make_hyper_cleaning(dims, number("noise_frac", 0.1), config.seed);
  }
  throw ConfigError("field 'problem.name': unknown problem '" + config.problem_name + "'");
}

DenseVector make_init_vector(const std::string& spec, std::size_t dim,
                             const std::string& field) {
  if (spec == "zeros") return DenseVector::zeros(dim);
  if (spec == "ones") return DenseVector::ones(dim);

  std::vector<double> values;
  std::istringstream stream(spec);
  std::string token;
  while (std::getline(stream, token, ',')) {
    token = trim(token);
    if (token.empty()) continue;
    values.push_back(parse_number(token, field));
  }
  if (values.size() != dim) {
    throw ConfigError("field '" + field + "': expected " + std::to_string(dim) +
                      " entries, got " + std::to_string(values.size()));
  }
  return DenseVector(std::move(values));
}

}  // namespace biloop::harness
