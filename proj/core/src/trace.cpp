#include "biloop/trace.hpp"

#include <cstdio>
#include <sstream>

namespace biloop {

namespace {

// Shortest representation that round-trips a double exactly.
std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  if (back == v) {
    for (int prec = 1; prec <= 16; ++prec) {
      char probe[40];
      std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
      std::sscanf(probe, "%lf", &back);
      if (back == v) return probe;
    }
  }
  return buf;
}

}  // namespace

void write_trace_csv(const RunTrace& trace, std::ostream& out, bool include_timing) {
  out << "k,grad_est_norm_sq,grad_true_norm_sq,gc_cum,mv_cum,wall_ms\n";
  for (const TraceRecord& r : trace.records) {
    out << r.k << ',' << format_double(r.grad_est_norm_sq) << ',';
    if (r.grad_true_norm_sq.has_value()) out << format_double(*r.grad_true_norm_sq);
    out << ',' << r.gc_cum << ',' << r.mv_cum << ',';
    if (include_timing) out << format_double(r.wall_ms);
    out << '\n';
  }
}

std::string trace_csv_string(const RunTrace& trace, bool include_timing) {
  std::ostringstream oss;
  write_trace_csv(trace, oss, include_timing);
  return oss.str();
}

}  // namespace biloop
