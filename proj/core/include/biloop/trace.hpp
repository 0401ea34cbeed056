#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "biloop/linalg.hpp"

namespace biloop {

// One base-loop iteration record. grad_true_norm_sq is present only when an
// exact oracle exists or a reference gradient was computed on this stride.
struct TraceRecord {
  std::size_t k = 0;
  double x_norm = 0.0;
  double grad_est_norm_sq = 0.0;
  std::optional<double> grad_true_norm_sq;
  std::uint64_t gc_cum = 0;
  std::uint64_t mv_cum = 0;
  double wall_ms = 0.0;
};

// Per-run record: exactly K iteration records, the final iterate, and an echo
// of the configuration that produced it.
struct RunTrace {
  std::vector<TraceRecord> records;
  DenseVector final_x;
  std::optional<double> final_grad_true_norm_sq;  // ||grad Phi(x_K)||^2
  std::string config_echo;
};

// How a run fills the reference-gradient column of its trace. With an exact
// oracle the column is filled every iteration; otherwise a reference
// hypergradient (analysis::exact_hypergradient) is computed every
// trace_stride iterations when compute_reference is set. Reference work is
// never charged to the run's cost counters.
struct RunOptions {
  std::size_t trace_stride = 1;
  bool compute_reference = false;
  double reference_tol = 1e-10;
  bool record_timing = false;
};

// CSV schema: header `k,grad_est_norm_sq,grad_true_norm_sq,gc_cum,mv_cum,wall_ms`.
// Missing reference gradients are written as empty cells. Wall-time cells are
// written only when include_timing is set; timing is machine-dependent and
// would break byte-for-byte reproducibility of seeded runs.
void write_trace_csv(const RunTrace& trace, std::ostream& out, bool include_timing = false);

std::string trace_csv_string(const RunTrace& trace, bool include_timing = false);

}  // namespace biloop
