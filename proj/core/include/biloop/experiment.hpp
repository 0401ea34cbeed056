#pragma once

#include <optional>
#include <string>
#include <vector>

#include "biloop/config.hpp"
#include "biloop/trace.hpp"

namespace biloop::harness {

// One line of the experiment summary. k_to_eps is the first iteration k with
// ||grad Phi(x_k)||^2 <= epsilon (true-gradient column), empty when never
// reached or when no reference gradient is available; gc/mv are the
// cumulative costs at that iteration (totals when not reached).
struct SummaryRow {
  std::string label;
  std::optional<std::size_t> k_to_eps;
  std::uint64_t gc = 0;
  std::uint64_t mv = 0;
  double final_grad_norm_sq = 0.0;
  bool final_is_estimate = false;  // no reference gradient; estimate reported
  std::optional<double> avg_true_grad_norm_sq;  // (1/K) sum over the true column
  std::optional<double> min_true_grad_norm_sq;
  std::string error;  // per-row failure in sweeps; empty on success
};

struct ExperimentResult {
  RunTrace trace;
  SummaryRow summary;
};

// Executes one configured run: builds the seeded problem, resolves loop sizes
// and stepsizes (scheme defaults where unset), runs AID or ITD, writes the
// trace CSV when output.path is set, and summarizes.
ExperimentResult run_experiment(const ExperimentConfig& config);

enum class SweepAxis { n, q, scheme };

SweepAxis parse_sweep_axis(const std::string& name);

// One run per axis value, all sharing the configured seed. Numeric axes are
// sorted ascending; scheme values keep their input order. Per-run failures
// are recorded in the row and the sweep continues. max_threads = 0 picks the
// hardware concurrency; the BILOOP_THREADS environment variable caps it.
std::vector<SummaryRow> sweep(const ExperimentConfig& base, SweepAxis axis,
                              const std::vector<std::string>& values,
                              std::size_t max_threads = 0);

std::string render_summary_table(const std::vector<SummaryRow>& rows);

}  // namespace biloop::harness
