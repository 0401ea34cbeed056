#include "biloop/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "biloop/aid.hpp"
#include "biloop/errors.hpp"
#include "biloop/itd.hpp"

namespace biloop::harness {

namespace {

std::string format_sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6e", v);
  return buf;
}

struct ResolvedRun {
  std::size_t n = 1, q = 1;
  double alpha = 0.0, eta = 0.0, beta = 0.0;
};

ResolvedRun resolve_hyperparams(const ExperimentConfig& config,
                                const AssumptionConstants& constants) {
  ResolvedRun run;
  if (config.scheme) {
    const analysis::HyperparamDefaults defaults = analysis::default_hyperparams(
        config.algorithm, *config.scheme, constants, config.epsilon);
    run.n = config.loops_n.value_or(defaults.N);
    run.q = config.loops_q.value_or(defaults.Q);
    run.alpha = config.alpha.value_or(defaults.alpha);
    run.eta = config.eta.value_or(defaults.eta);
    run.beta = config.beta.value_or(defaults.beta);
    return run;
  }
  if (!config.loops_n) {
    throw ConfigError("either 'scheme' or 'loops.N' must be set");
  }
  run.n = *config.loops_n;
  run.q = config.loops_q.value_or(1);
  run.alpha = config.alpha.value_or(1.0 / constants.L);
  run.eta = config.eta.value_or(1.0 / constants.L);
  run.beta = config.beta.value_or(0.5 / analysis::smoothness_constant(constants));
  return run;
}

std::string run_label(const ExperimentConfig& config, const ResolvedRun& run) {
  std::ostringstream label;
  if (config.scheme) {
    label << analysis::scheme_name(config.algorithm, *config.scheme);
  } else {
    label << algorithm_name(config.algorithm);
  }
  label << " N=" << run.n;
  if (config.algorithm == analysis::Algorithm::aid) label << " Q=" << run.q;
  return label.str();
}

SummaryRow summarize(const std::string& label, const RunTrace& trace, double epsilon) {
  SummaryRow row;
  row.label = label;
  double sum = 0.0;
  double lowest = 0.0;
  std::size_t observed = 0;
  for (const TraceRecord& rec : trace.records) {
    if (!rec.grad_true_norm_sq.has_value()) continue;
    const double v = *rec.grad_true_norm_sq;
    sum += v;
    lowest = observed == 0 ? v : std::min(lowest, v);
    ++observed;
    if (!row.k_to_eps && v <= epsilon) {
      row.k_to_eps = rec.k;
      row.gc = rec.gc_cum;
      row.mv = rec.mv_cum;
    }
  }
  if (!row.k_to_eps && !trace.records.empty()) {
    row.gc = trace.records.back().gc_cum;
    row.mv = trace.records.back().mv_cum;
  }
  if (observed > 0) {
    row.avg_true_grad_norm_sq = sum / static_cast<double>(observed);
    row.min_true_grad_norm_sq = lowest;
  }
  if (trace.final_grad_true_norm_sq.has_value()) {
    row.final_grad_norm_sq = *trace.final_grad_true_norm_sq;
  } else if (!trace.records.empty()) {
    row.final_grad_norm_sq = trace.records.back().grad_est_norm_sq;
    row.final_is_estimate = true;
  }
  return row;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const BilevelOracle oracle = build_problem(config);
  const ResolvedRun resolved = resolve_hyperparams(config, oracle.constants);

  RunOptions options;
  options.trace_stride = config.trace_stride;
  options.compute_reference = !oracle.exact.has_grad_phi();
  options.record_timing = config.timing;

  RunTrace trace;
  if (config.algorithm == analysis::Algorithm::aid) {
    aid::LoopConfig loop;
    loop.N = resolved.n;
    loop.Q = resolved.q;
    loop.K = config.iterations;
    loop.alpha = resolved.alpha;
    loop.eta = resolved.eta;
    loop.beta = resolved.beta;
    loop.warm_start_y = config.warm_start_y;
    loop.warm_start_v = config.warm_start_v;
    loop.x0 = make_init_vector(config.x0_init, oracle.dim_x, "init.x0");
    loop.y0 = make_init_vector(config.y0_init, oracle.dim_y, "init.y0");
    loop.v0 = make_init_vector(config.v0_init, oracle.dim_y, "init.v0");
    trace = aid::run_aid(oracle, loop, options);
  } else {
    itd::ItdConfig loop;
    loop.N = resolved.n;
    loop.K = config.iterations;
    loop.alpha = resolved.alpha;
    loop.beta = resolved.beta;
    loop.warm_start_y = config.warm_start_y;
    loop.x0 = make_init_vector(config.x0_init, oracle.dim_x, "init.x0");
    loop.y0 = make_init_vector(config.y0_init, oracle.dim_y, "init.y0");
    trace = itd::run_itd(oracle, loop, options);
  }
  trace.config_echo = serialize_config(config);

  if (!config.output_path.empty()) {
    std::ofstream out(config.output_path, std::ios::binary);
    if (!out) throw ConfigError("cannot write trace to '" + config.output_path + "'");
    write_trace_csv(trace, out, config.timing);
  }

  ExperimentResult result;
  result.summary = summarize(run_label(config, resolved), trace, config.epsilon);
  result.trace = std::move(trace);
  return result;
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "N") return SweepAxis::n;
  if (name == "Q") return SweepAxis::q;
  if (name == "scheme") return SweepAxis::scheme;
  throw ConfigError("sweep axis must be N, Q or scheme; got '" + name + "'");
}

namespace {

ExperimentConfig apply_axis_value(const ExperimentConfig& base, SweepAxis axis,
                                  const std::string& value) {
  ExperimentConfig config = base;
  switch (axis) {
    case SweepAxis::n: {
      const long long n = std::strtoll(value.c_str(), nullptr, 10);
      if (n <= 0) throw ConfigError("sweep value '" + value + "' is not a positive N");
      config.loops_n = static_cast<std::size_t>(n);
      break;
    }
    case SweepAxis::q: {
      const long long q = std::strtoll(value.c_str(), nullptr, 10);
      if (q <= 0) throw ConfigError("sweep value '" + value + "' is not a positive Q");
      config.loops_q = static_cast<std::size_t>(q);
      break;
    }
    case SweepAxis::scheme: {
      config.scheme = parse_scheme_name(value);
      break;
    }
  }
  if (!base.output_path.empty()) {
    config.output_path = base.output_path + "." + value + ".csv";
  }
  return config;
}

std::size_t thread_budget(std::size_t requested, std::size_t jobs) {
  std::size_t limit = requested == 0 ? std::thread::hardware_concurrency() : requested;
  if (limit == 0) limit = 1;
  if (const char* env = std::getenv("BILOOP_THREADS")) {
    const long long cap = std::strtoll(env, nullptr, 10);
    if (cap > 0) limit = std::min<std::size_t>(limit, static_cast<std::size_t>(cap));
  }
  return std::max<std::size_t>(1, std::min(limit, jobs));
}

}  // namespace

std::vector<SummaryRow> sweep(const ExperimentConfig& base, SweepAxis axis,
                              const std::vector<std::string>& values,
                              std::size_t max_threads) {
  std::vector<std::string> ordered = values;
  if (axis != SweepAxis::scheme) {
    std::sort(ordered.begin(), ordered.end(), [](const std::string& a, const std::string& b) {
      return std::strtoll(a.c_str(), nullptr, 10) < std::strtoll(b.c_str(), nullptr, 10);
    });
  }
  std::vector<SummaryRow> rows(ordered.size());
  if (ordered.empty()) return rows;

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= ordered.size()) return;
      try {
        const ExperimentConfig config = apply_axis_value(base, axis, ordered[i]);
        SummaryRow row = run_experiment(config).summary;
        row.label += " [" + ordered[i] + "]";
        rows[i] = std::move(row);
      } catch (const std::exception& err) {
        rows[i].label = ordered[i];
        rows[i].error = err.what();
      }
    }
  };

  const std::size_t threads = thread_budget(max_threads, ordered.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  return rows;
}

std::string render_summary_table(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << "run                                      K_to_eps    final_grad_sq  "
         "avg_grad_sq    min_grad_sq    Gc          MV\n";
  for (const SummaryRow& row : rows) {
    if (!row.error.empty()) {
      out << row.label << "  ERROR: " << row.error << '\n';
      continue;
    }
    std::ostringstream k_cell;
    if (row.k_to_eps) {
      k_cell << *row.k_to_eps;
    } else {
      k_cell << "not reached";
    }
    char line[256];
    std::snprintf(line, sizeof(line), "%-40s %-11s %-14s %-14s %-14s %-11llu %llu\n",
                  row.label.c_str(), k_cell.str().c_str(),
                  (format_sci(row.final_grad_norm_sq) +
                   (row.final_is_estimate ? "*" : ""))
                      .c_str(),
                  row.avg_true_grad_norm_sq ? format_sci(*row.avg_true_grad_norm_sq).c_str()
                                            : "n/a",
                  row.min_true_grad_norm_sq ? format_sci(*row.min_true_grad_norm_sq).c_str()
                                            : "n/a",
                  static_cast<unsigned long long>(row.gc),
                  static_cast<unsigned long long>(row.mv));
    out << line;
  }
  return out.str();
}

}  // namespace biloop::harness
