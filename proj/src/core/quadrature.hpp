#pragma once

// 1-D adaptive quadrature: 15-point Gauss-Kronrod panels with embedded
// 7-point error estimates, refined by interval bisection.  Deterministic:
// the worst panel (by error bound, serial id tiebreak) is split until the
// summed bound meets the tolerance or the depth/panel limits trip.

#include <functional>
#include <vector>

namespace goodhart {

struct QuadOptions {
  double rel_tol = 1e-10;
  double abs_tol = 0.0;
  int max_depth = 60;
  int max_panels = 100000;
};

struct QuadResult {
  double value = 0.0;
  double error_bound = 0.0;
  int panels = 0;
};

// Errors: QuadratureNonConvergence when the limits are reached with the
// tolerance unmet.
QuadResult integrate(const std::function<double(double)>& f, double lo,
                     double hi, const QuadOptions& opts = {});

// Same, seeded with an initial partition (strictly increasing breakpoints,
// first = lo, last = hi).  Use when the integrand has known narrow features
// the first panel would step over.
QuadResult integrate_segmented(const std::function<double(double)>& f,
                               const std::vector<double>& breakpoints,
                               const QuadOptions& opts = {});

}  // namespace goodhart
