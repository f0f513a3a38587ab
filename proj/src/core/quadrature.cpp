#include "core/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "core/errors.hpp"

namespace goodhart {

namespace {

// QUADPACK 15-point Kronrod abscissae/weights on [-1, 1] and the embedded
// 7-point Gauss weights (applied at the odd Kronrod nodes and the center).
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct PanelEval {
  double kronrod;
  double gauss;
  double resabs;  // integral of |f|
  double resasc;  // integral of |f - mean|
};

PanelEval gk15(const std::function<double(double)>& f, double lo, double hi) {
  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  double fv[15];
  for (int i = 0; i < 7; ++i) {
    fv[i] = f(center - half * kXgk[i]);
    fv[14 - i] = f(center + half * kXgk[i]);
  }
  fv[7] = f(center);

  double kron = kWgk[7] * fv[7];
  double gauss = kWg[3] * fv[7];
  double resabs = kWgk[7] * std::fabs(fv[7]);
  for (int i = 0; i < 7; ++i) {
    const double pair = fv[i] + fv[14 - i];
    kron += kWgk[i] * pair;
    resabs += kWgk[i] * (std::fabs(fv[i]) + std::fabs(fv[14 - i]));
    if (i % 2 == 1) gauss += kWg[i / 2] * pair;
  }
  const double mean = 0.5 * kron;
  double resasc = kWgk[7] * std::fabs(fv[7] - mean);
  for (int i = 0; i < 7; ++i) {
    resasc += kWgk[i] * (std::fabs(fv[i] - mean) + std::fabs(fv[14 - i] - mean));
  }
  return PanelEval{kron * half, gauss * half, resabs * half, resasc * half};
}

// QUADPACK error heuristic: sharpen |K - G| against the variation scale.
double panel_error(const PanelEval& e) {
  double err = std::fabs(e.kronrod - e.gauss);
  if (e.resasc != 0.0 && err != 0.0) {
    err = e.resasc * std::min(1.0, std::pow(200.0 * err / e.resasc, 1.5));
  }
  const double floor =
      std::numeric_limits<double>::epsilon() * 50.0 * e.resabs;
  return std::max(err, floor);
}

struct Panel {
  double lo, hi, value, error;
  int depth;
  long id;
  bool operator<(const Panel& other) const {
    if (error != other.error) return error < other.error;
    return id > other.id;
  }
};

}  // namespace

QuadResult integrate_segmented(const std::function<double(double)>& f,
                               const std::vector<double>& breakpoints,
                               const QuadOptions& opts) {
  if (breakpoints.size() < 2) {
    fail(ErrorCode::InvalidArgument, "quadrature needs at least one interval");
  }
  std::priority_queue<Panel> queue;
  long next_id = 0;
  double total = 0.0, total_err = 0.0;
  auto push_panel = [&](double lo, double hi, int depth) {
    const PanelEval e = gk15(f, lo, hi);
    const double err = panel_error(e);
    total += e.kronrod;
    total_err += err;
    queue.push(Panel{lo, hi, e.kronrod, err, depth, next_id++});
  };
  for (size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    if (!(breakpoints[i] < breakpoints[i + 1])) {
      fail(ErrorCode::InvalidArgument, "breakpoints must be increasing");
    }
    push_panel(breakpoints[i], breakpoints[i + 1], 0);
  }

  auto tolerance = [&]() {
    return std::max(opts.abs_tol, opts.rel_tol * std::fabs(total));
  };
  while (total_err > tolerance()) {
    const Panel worst = queue.top();
    if (worst.depth >= opts.max_depth ||
        static_cast<int>(queue.size()) >= opts.max_panels) {
      fail(ErrorCode::QuadratureNonConvergence,
           "adaptive quadrature hit its refinement limit before tolerance");
    }
    queue.pop();
    total -= worst.value;
    total_err -= worst.error;
    const double mid = 0.5 * (worst.lo + worst.hi);
    push_panel(worst.lo, mid, worst.depth + 1);
    push_panel(mid, worst.hi, worst.depth + 1);
  }
  return QuadResult{total, total_err, static_cast<int>(queue.size())};
}

QuadResult integrate(const std::function<double(double)>& f, double lo,
                     double hi, const QuadOptions& opts) {
  return integrate_segmented(f, {lo, hi}, opts);
}

}  // namespace goodhart
