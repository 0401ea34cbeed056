#pragma once

#include <cstddef>
#include <vector>

#include "biloop/linalg.hpp"
#include "biloop/oracle.hpp"
#include "biloop/trace.hpp"

namespace biloop::itd {

struct ItdConfig {
  std::size_t N = 1;
  std::size_t K = 1;
  double alpha = 0.0;
  double beta = 0.0;
  bool warm_start_y = true;
  DenseVector x0;
  DenseVector y0;
};

// The recorded inner path y^0, ..., y^N for one outer iteration, bound to the
// (x, alpha) it was produced at so a mismatched reverse pass is rejected.
class Trajectory {
 public:
  Trajectory(DenseVector x, double alpha) : x_(std::move(x)), alpha_(alpha) {}

  void push(DenseVector y) { points_.push_back(std::move(y)); }

  std::size_t steps() const { return points_.size() - 1; }  // N
  const DenseVector& point(std::size_t t) const { return points_[t]; }
  const DenseVector& last() const { return points_.back(); }
  const DenseVector& x() const { return x_; }
  double alpha() const { return alpha_; }

 private:
  DenseVector x_;
  double alpha_;
  std::vector<DenseVector> points_;
};

// N gradient steps on g(x, .) recording all N+1 points. counters.gc += N.
// N = 0 returns the single-point trajectory [y_start] at zero cost.
Trajectory inner_gd_with_trajectory(const BilevelOracle& oracle, const DenseVector& x,
                                    const DenseVector& y_start, std::size_t n,
                                    double alpha, CostCounters& counters);

// Reverse-mode accumulation over the recorded path:
//
//   u <- grad_y f(x, y^N)
//   for t = N-1, ..., 0:   p += jvp_xy_g(x, y^t, u);  u <- u - alpha * hvp_yy_g(x, y^t, u)
//   return grad_x f(x, y^N) - alpha * p.
//
// counters.gc += 2. counters.mv += 2N: N JVPs plus N HVPs, although only N-1
// HVPs are actually executed -- the propagation at t = 0 would feed a
// nonexistent t = -1 term, so it is skipped and charged by convention to keep
// the per-iteration tally at 2N.
DenseVector itd_hypergradient(const BilevelOracle& oracle, const DenseVector& x,
                              const Trajectory& trajectory, double alpha,
                              CostCounters& counters);

// Full warm-start ITD run; K iterations of trajectory recording, reverse
// accumulation, and the outer step. The warm-start point y_k^0 is treated as
// a constant with respect to x_k: differentiation never reaches back through
// earlier outer iterations. After the run gc == K(N+2) and mv == 2KN.
RunTrace run_itd(const BilevelOracle& oracle, const ItdConfig& config,
                 const RunOptions& options = {});

}  // namespace biloop::itd
