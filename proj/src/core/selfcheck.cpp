#include "core/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include "core/asymptotics.hpp"
#include "core/errors.hpp"
#include "core/mc.hpp"
#include "core/quadrature.hpp"
#include "core/regimes.hpp"
#include "core/series.hpp"

namespace goodhart {

namespace {

constexpr std::uint64_t kSelfcheckSeed = 0x600d4a27ull;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

class Suite {
 public:
  void check(const std::string& name, bool pass, const std::string& detail) {
    report_.checks.push_back({name, pass, detail});
    if (pass) {
      ++report_.n_pass;
    } else {
      ++report_.n_fail;
    }
  }
  CheckReport take() { return std::move(report_); }

 private:
  CheckReport report_;
};

// ---------------------------------------------------------------- 2-D quad

// abs_tol keeps sign-cancelling moment integrands (total near 0) from
// spinning the refinement; pass the natural scale of the integral.
double quad2d_over_halfplane(const std::function<double(double, double)>& f,
                             double x_lo, double x_hi, double g_lo,
                             double g_hi, double threshold_m, bool restrict,
                             double rel_tol, double abs_tol) {
  QuadOptions inner_opts;
  inner_opts.rel_tol = rel_tol * 0.1;
  inner_opts.abs_tol = 0.25 * abs_tol / std::max(x_hi - x_lo, 1.0);
  QuadOptions outer_opts;
  outer_opts.rel_tol = rel_tol;
  outer_opts.abs_tol = abs_tol;
  const auto outer = [&](double x) {
    double lo = g_lo;
    if (restrict) lo = std::max(lo, threshold_m - x);
    if (lo >= g_hi) return 0.0;
    return integrate([&](double g) { return f(g, x); }, lo, g_hi, inner_opts)
        .value;
  };
  return integrate(outer, x_lo, x_hi, outer_opts).value;
}

struct GaussianBox {
  double x_lo, x_hi, g_lo, g_hi;
};

GaussianBox gaussian_box(const CovarianceSpec& spec, double m) {
  const double sg = std::sqrt(spec.a), sx = std::sqrt(spec.b);
  const double mm = std::isfinite(m) ? m : 0.0;
  const double gc = std::max(0.0, spec.beta() * mm);
  const double xc = std::max(0.0, (1.0 - spec.beta()) * mm);
  GaussianBox box;
  box.g_lo = std::min(0.0, gc) - 14.0 * sg - 2.0;
  box.g_hi = std::max(0.0, gc) + 14.0 * sg + 2.0;
  box.x_lo = std::min(0.0, xc) - 14.0 * sx - 2.0;
  box.x_hi = std::max(0.0, xc) + 14.0 * sx + 2.0;
  return box;
}

}  // namespace

Quad2dMoments gaussian_moments_quad2d(const CovarianceSpec& spec, double m,
                                      double rel_tol) {
  const GaussianBox box = gaussian_box(spec, m);
  const auto f = [&](double g, double x) {
    return joint_density_gaussian(spec, g, x);
  };
  Quad2dMoments out;
  // The tail integrand is positive, so a pure relative tolerance works;
  // the moment integrals can cancel to ~0 and get an absolute floor at
  // their natural scale tail * (sqrt(s)(1+|u|))^order.
  out.tail = quad2d_over_halfplane(f, box.x_lo, box.x_hi, box.g_lo, box.g_hi,
                                   m, true, rel_tol, 0.0);
  const double u = std::fabs(m) / std::sqrt(spec.s());
  const double scale1 = std::sqrt(spec.s()) * (1.0 + u);
  const auto integral = [&](const std::function<double(double, double)>& h,
                            double scale) {
    return quad2d_over_halfplane(h, box.x_lo, box.x_hi, box.g_lo, box.g_hi, m,
                                 true, rel_tol, rel_tol * out.tail * scale);
  };
  out.mean_g =
      integral([&](double g, double x) { return g * f(g, x); }, scale1) /
      out.tail;
  out.mean_xi =
      integral([&](double g, double x) { return x * f(g, x); }, scale1) /
      out.tail;
  out.second_g = integral(
                     [&](double g, double x) { return g * g * f(g, x); },
                     scale1 * scale1) /
                 out.tail;
  out.cross = integral([&](double g, double x) { return g * x * f(g, x); },
                       scale1 * scale1) /
              out.tail;
  return out;
}

double gaussian_density_mass_quad2d(const CovarianceSpec& spec, double rel_tol) {
  const GaussianBox box = gaussian_box(spec, 0.0);
  return quad2d_over_halfplane(
      [&](double g, double x) { return joint_density_gaussian(spec, g, x); },
      box.x_lo, box.x_hi, box.g_lo, box.g_hi, 0.0, false, rel_tol, 0.0);
}

double expheavy_density_mass_quad2d(const HeavyTailSpec& spec, double rel_tol) {
  // Outer over g on [0, 60]; inner over x up to the conditional quantile at
  // survival exp(-60).
  QuadOptions inner_opts;
  inner_opts.rel_tol = rel_tol * 0.1;
  QuadOptions outer_opts;
  outer_opts.rel_tol = rel_tol;
  const auto inner = [&](double g) {
    const double gq = std::max(g, 1e-10);
    const double x_hi = xi_from_exponential(spec, gq, 60.0);
    std::vector<double> pts{spec.scale};
    for (double e = 0.5; e < 60.0; e *= 2.0) {
      pts.push_back(xi_from_exponential(spec, gq, e));
    }
    pts.push_back(x_hi);
    return integrate_segmented(
               [&](double x) { return joint_density_expheavy(spec, g, x); },
               pts, inner_opts)
        .value;
  };
  return integrate_segmented(inner, {1e-12, 0.01, 0.5, 2.0, 8.0, 25.0, 60.0},
                             outer_opts)
      .value;
}

namespace {

// ------------------------------------------------------------ DKW helpers

double dkw_band(std::size_t n, double alpha) {
  return std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(n)));
}

struct DkwOutcome {
  double worst_gap = 0.0;
  double band = 0.0;
};

DkwOutcome dkw_compare(std::vector<double> samples,
                       const std::vector<double>& grid,
                       const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  DkwOutcome out;
  out.band = dkw_band(samples.size(), 0.001);
  for (double t : grid) {
    const auto it = std::upper_bound(samples.begin(), samples.end(), t);
    const double empirical =
        static_cast<double>(it - samples.begin()) / samples.size();
    out.worst_gap = std::max(out.worst_gap, std::fabs(empirical - cdf(t)));
  }
  return out;
}

// ----------------------------------------------------------------- scopes

void gaussian_scope(Suite& suite) {
  const CovarianceSpec specs[] = {validate_gaussian_spec(1, 1, 0),
                                  validate_gaussian_spec(2, 1, 0.5),
                                  validate_gaussian_spec(1, 2, -0.5)};

  {
    const double mass = gaussian_density_mass_quad2d(specs[1], 1e-9);
    suite.check("gaussian.density_normalization", std::fabs(mass - 1.0) < 1e-6,
                "integral of joint density = " + fmt(mass));
  }

  {
    bool ok = true;
    double worst = 0.0;
    for (const auto& spec : specs) {
      const double rs = std::sqrt(spec.s());
      for (double u : {0.0, 1.0, 2.0, 4.0}) {
        const double m = u * rs;
        const ConditionalMoments ex = gaussian_conditional_moments_exact(spec, m);
        const Quad2dMoments q = gaussian_moments_quad2d(spec, m, 1e-10);
        const double scale1 = rs * (1.0 + u);
        // {exact, quadrature, scale floor for values cancelling to ~0}
        const double trip[][3] = {{ex.tail_prob, q.tail, 0.0},
                                  {ex.mean_g, q.mean_g, scale1},
                                  {ex.mean_xi, q.mean_xi, scale1},
                                  {ex.second_g, q.second_g, scale1 * scale1},
                                  {ex.cross, q.cross, scale1 * scale1}};
        for (const auto& p : trip) {
          const double scale = std::max({std::fabs(p[0]), std::fabs(p[1]), p[2]});
          const double rel = std::fabs(p[0] - p[1]) / scale;
          worst = std::max(worst, rel);
          ok = ok && rel < 1e-8;
        }
      }
    }
    suite.check("gaussian.oracle_vs_quad2d", ok,
                "worst relative gap vs 2-D quadrature = " + fmt(worst));
  }

  {
    bool increasing = true;
    bool corr_down = true;
    for (const auto& spec : specs) {
      if (!(spec.a + spec.c > 0.0)) continue;
      const double rs = std::sqrt(spec.s());
      double prev_mean = -1e300;
      double prev_corr = 2.0;
      for (double u = 0.25; u <= 64.0; u *= 2.0) {
        const ConditionalMoments mo =
            gaussian_conditional_moments_exact(spec, u * rs);
        increasing = increasing && mo.mean_g > prev_mean;
        prev_mean = mo.mean_g;
        if (u >= 2.0) {
          corr_down = corr_down && mo.corr_gm < prev_corr;
          prev_corr = mo.corr_gm;
        }
      }
    }
    suite.check("gaussian.mean_g_increasing", increasing,
                "oracle E[G|M>m] strictly increasing on the tested grid");
    suite.check("gaussian.corr_decreasing_from_2sd", corr_down,
                "oracle Corr(G,M|M>m) strictly decreasing for m >= 2*sqrt(s)");
  }

  {
    // Expansion error vs the exact oracle across a geometric grid.
    bool ok = true;
    std::ostringstream detail;
    for (const auto& spec : specs) {
      const double rs = std::sqrt(spec.s());
      double prev[9];
      std::fill(std::begin(prev), std::end(prev), 1e300);
      for (double u : {8.0, 16.0, 32.0, 64.0}) {
        const double m = u * rs;
        const ConditionalMoments ex = gaussian_conditional_moments_exact(spec, m);
        const AsymptoticMoments as = gaussian_asymptotic_moments(spec, m);
        // tail_prob underflows past u ~ 38; compare it in log space.
        const double rel[9] = {
            std::fabs(std::expm1(as.log_tail_prob - ex.log_tail_prob)),
            std::fabs(as.mean_g / ex.mean_g - 1.0),
            std::fabs(as.mean_xi / ex.mean_xi - 1.0),
            std::fabs(as.second_g / ex.second_g - 1.0),
            std::fabs(as.cross / ex.cross - 1.0),
            std::fabs(as.var_g / ex.var_g - 1.0),
            std::fabs(as.var_xi / ex.var_xi - 1.0),
            std::fabs(as.cov_gm / ex.cov_gm - 1.0),
            std::fabs(as.corr_gm / ex.corr_gm - 1.0)};
        for (int i = 0; i < 9; ++i) {
          ok = ok && rel[i] <= prev[i] * (1.0 + 1e-9);
          prev[i] = rel[i];
        }
        if (u == 64.0) {
          for (int i = 0; i < 9; ++i) {
            // cov_gm carries only its leading term (true deviation 6s/m^2 =
            // 1.46e-3 at this m for every spec); corr_gm's first correction
            // scales with (a+c)^2/det and clears 1e-3 only on specs near
            // (1,1,0).  Both are pinned at 2.5e-3, everything else at 1e-3.
            const bool single_term = i == 7 || (i == 8 && &spec != &specs[0]);
            ok = ok && rel[i] < (single_term ? 2.5e-3 : 1e-3);
          }
          detail << fmt(rel[1]) << "/" << fmt(rel[8]) << " ";
        }
      }
    }
    suite.check("gaussian.asym_convergence", ok,
                "relative error decreasing on {8,16,32,64}*sqrt(s); mean/corr "
                "gaps at 64*sqrt(s): " + detail.str());
  }

  {
    bool ok = true;
    double worst = 0.0;
    for (const auto& spec : specs) {
      const double rs = std::sqrt(spec.s());
      for (double u : {8.0, 12.0, 16.0}) {
        const AsymptoticMoments as = gaussian_asymptotic_moments(spec, u * rs);
        const double residual =
            std::fabs(as.second_g - as.mean_g * as.mean_g - as.var_g);
        worst = std::max(worst, residual / as.var_g_next);
        ok = ok && residual <= as.var_g_next;
      }
    }
    suite.check("gaussian.identity_var_g", ok,
                "max |second_g - mean_g^2 - var_g| / next-term = " + fmt(worst));
  }

  {
    const CovarianceSpec spec = specs[0];
    std::vector<double> ms, corrs;
    const double rs = std::sqrt(spec.s());
    for (double u : {4.0, 8.0, 16.0, 32.0, 64.0}) {
      ms.push_back(u * rs);
      corrs.push_back(gaussian_conditional_moments_exact(spec, u * rs).corr_gm);
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < ms.size(); ++i) {
      sx += std::log(ms[i]);
      sy += std::log(corrs[i]);
    }
    const double mx = sx / ms.size(), my = sy / ms.size();
    for (std::size_t i = 0; i < ms.size(); ++i) {
      sxx += (std::log(ms[i]) - mx) * (std::log(ms[i]) - mx);
      sxy += (std::log(ms[i]) - mx) * (std::log(corrs[i]) - my);
    }
    const double slope = sxy / sxx;
    suite.check("gaussian.corr_decay_slope", slope <= -0.5,
                "log-log slope of the oracle correlation = " + fmt(slope) +
                    " (1/m decay predicts -1)");
  }

  {
    // Sampler moments, 1e5 pairs of (2,1,0.5).
    const CovarianceSpec spec = specs[1];
    RandomStream rng(kSelfcheckSeed, "selfcheck.sampler.gaussian");
    const std::size_t n = 100000;
    double sg = 0, sx = 0, sgg = 0, sxx = 0, sgx = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const SamplePair p = sample_gaussian_pair(spec, rng);
      sg += p.g;
      sx += p.xi;
      sgg += p.g * p.g;
      sxx += p.xi * p.xi;
      sgx += p.g * p.xi;
    }
    const double vg = sgg / n - (sg / n) * (sg / n);
    const double vx = sxx / n - (sx / n) * (sx / n);
    const double cgx = sgx / n - (sg / n) * (sx / n);
    const bool ok =
        std::fabs(vg - spec.a) < 5.0 * std::sqrt(2.0 * spec.a * spec.a / n) &&
        std::fabs(vx - spec.b) < 5.0 * std::sqrt(2.0 * spec.b * spec.b / n) &&
        std::fabs(cgx - spec.c) <
            5.0 * std::sqrt((spec.a * spec.b + spec.c * spec.c) / n);
    suite.check("gaussian.sampler_moments", ok,
                "sample (VarG, VarXi, Cov) = (" + fmt(vg) + ", " + fmt(vx) +
                    ", " + fmt(cgx) + ")");
  }

  {
    const CovarianceSpec spec = specs[1];
    RandomStream rng(kSelfcheckSeed, "selfcheck.dkw.gaussian");
    std::vector<double> samples(100000);
    for (double& v : samples) v = sample_gaussian_pair(spec, rng).m_value;
    const double rs = std::sqrt(spec.s());
    std::vector<double> grid;
    for (int i = 0; i < 20; ++i) grid.push_back((-3.0 + 6.0 * i / 19.0) * rs);
    const DkwOutcome dkw = dkw_compare(samples, grid, [&](double t) {
      return 1.0 - gaussian_moments_quad2d(spec, t, 1e-9).tail;
    });
    suite.check("gaussian.sampler_density_dkw", dkw.worst_gap < dkw.band,
                "worst |F_emp - F_quad| = " + fmt(dkw.worst_gap) +
                    ", DKW band at 0.999 = " + fmt(dkw.band));
  }

  {
    // Reference regime: benign Goodhart for (2,1,0.5) on the oracle curve.
    const CovarianceSpec spec = specs[1];
    const double rs = std::sqrt(spec.s());
    std::vector<TrajectoryPoint> traj;
    for (double u : {4.0, 8.0, 16.0, 32.0, 64.0, 128.0}) {
      const ConditionalMoments mo = gaussian_conditional_moments_exact(spec, u * rs);
      TrajectoryPoint pt;
      pt.m = u * rs;
      pt.mean_g = mo.mean_g;
      pt.mean_g_err = mo.mean_g_err;
      pt.corr_gm = mo.corr_gm;
      pt.corr_gm_err = mo.corr_gm_err;
      pt.source = "Oracle";
      traj.push_back(pt);
    }
    const RegimeResult res = classify(
        traj, -std::numeric_limits<double>::infinity(),
        std::numeric_limits<double>::infinity());
    suite.check("gaussian.regime_benign", res.label == RegimeLabel::Benign,
                std::string("classified as ") + regime_label_name(res.label));
  }
}

void expheavy_scope(Suite& suite) {
  const HeavyTailSpec spec = validate_expheavy_spec(3.0, 1.0);

  {
    const double mass = expheavy_density_mass_quad2d(spec, 1e-9);
    suite.check("expheavy.density_normalization", std::fabs(mass - 1.0) < 1e-8,
                "integral of joint density = " + fmt(mass));
  }

  {
    const ConditionalMoments mo =
        expheavy_conditional_moments_quad(spec, spec.scale + 1e-9, 1e-8);
    suite.check("expheavy.tail_continuity", std::fabs(mo.tail_prob - 1.0) < 1e-6,
                "P(M > scale+1e-9) = " + fmt(mo.tail_prob));
  }

  {
    bool decreasing = true;
    double prev = 1e300;
    for (double m : {5.0, 10.0, 20.0, 40.0, 80.0}) {
      const double mean_g = expheavy_conditional_moments_quad(spec, m, 1e-9).mean_g;
      decreasing = decreasing && mean_g < prev;
      prev = mean_g;
    }
    suite.check("expheavy.mean_g_decreasing", decreasing,
                "oracle E[G|M>m] strictly decreasing for m >= 5*scale");
  }

  {
    double prev = 0.0;
    bool increasing = true;
    double last_ratio = 0.0;
    for (double m : {20.0, 40.0, 80.0}) {
      const double r = expheavy_conditional_moments_quad(spec, m, 1e-9).mean_xi / m;
      increasing = increasing && r > prev;
      prev = r;
      last_ratio = r;
    }
    const bool in_band = last_ratio >= 1.9 && last_ratio <= 2.0;
    suite.check("expheavy.discrepancy_capture", increasing && in_band,
                "E[xi|M>m]/m at m=80 = " + fmt(last_ratio) +
                    ", increasing toward (b-1)/(b-2) = 2");
  }

  {
    const double mg = expheavy_conditional_moments_quad(spec, 80.0, 1e-9).mean_g;
    const double scaled = 80.0 * 80.0 * mg;
    suite.check("expheavy.strong_rate", std::fabs(scaled - 1.0) < 0.05,
                "m^2 E[G|M>m] at m=80 = " + fmt(scaled));
  }

  {
    bool ok = true;
    double prev = 1e300;
    double last = 0.0;
    for (double m : {8.0, 16.0, 32.0, 64.0}) {
      const double exact = expheavy_conditional_moments_quad(spec, m, 1e-12).tail_prob;
      // Compare against the series for the integral part plus the same
      // analytic remainder the oracle adds.
      const double approx = expheavy_asymptotic_moments(spec, m, 4).tail_prob;
      const double rel = std::fabs(approx / exact - 1.0);
      ok = ok && rel <= prev * (1.0 + 1e-9);
      prev = rel;
      last = rel;
    }
    ok = ok && last < 1e-4;
    suite.check("expheavy.asym_tail_convergence", ok,
                "order-4 tail error decreasing on {8,16,32,64}*scale; at 64: " +
                    fmt(last));
  }

  {
    RandomStream rng(kSelfcheckSeed, "selfcheck.sampler.expheavy");
    const std::size_t n = 100000;
    double sum_g = 0.0;
    std::size_t beyond2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const SamplePair p = sample_expheavy_pair(spec, rng);
      sum_g += p.g;
      if (p.xi > 2.0) ++beyond2;
    }
    const double p2 = static_cast<double>(beyond2) / n;
    const double se2 = std::sqrt(0.25 * 0.75 / n);
    const double gbar = sum_g / n;
    const bool ok = std::fabs(p2 - 0.25) < 5.0 * se2 &&
                    std::fabs(gbar - 1.0) < 5.0 / std::sqrt(static_cast<double>(n));
    suite.check("expheavy.sampler_marginals", ok,
                "P(xi>2) = " + fmt(p2) + " (expect 0.25), mean g = " + fmt(gbar));
  }

  {
    RandomStream rng(kSelfcheckSeed, "selfcheck.dkw.expheavy");
    std::vector<double> samples(100000);
    for (double& v : samples) v = sample_expheavy_pair(spec, rng).m_value;
    const std::vector<double> grid = {1.1, 1.3, 1.5, 1.8, 2.1, 2.5, 3.0,
                                      3.6, 4.3, 5.0, 6.0, 7.2, 8.6, 10.0,
                                      13.0, 16.0, 20.0, 26.0, 35.0, 50.0};
    const DkwOutcome dkw = dkw_compare(samples, grid, [&](double t) {
      return 1.0 - expheavy_conditional_moments_quad(spec, t, 1e-9).tail_prob;
    });
    suite.check("expheavy.sampler_density_dkw", dkw.worst_gap < dkw.band,
                "worst |F_emp - F_quad| = " + fmt(dkw.worst_gap) +
                    ", DKW band at 0.999 = " + fmt(dkw.band));
  }

  {
    std::vector<TrajectoryPoint> traj;
    for (double m : {10.0, 20.0, 40.0, 80.0, 160.0, 320.0}) {
      const ConditionalMoments mo = expheavy_conditional_moments_quad(spec, m, 1e-9);
      TrajectoryPoint pt;
      pt.m = m;
      pt.mean_g = mo.mean_g;
      pt.mean_g_err = mo.mean_g_err;
      pt.source = "Oracle";
      traj.push_back(pt);
    }
    const RegimeResult res =
        classify(traj, 0.0, std::numeric_limits<double>::infinity());
    suite.check("expheavy.regime_strong", res.label == RegimeLabel::Strong,
                std::string("classified as ") + regime_label_name(res.label));
  }
}

void series_scope(Suite& suite, CheckReport& report) {
  const series::TableVerification verification = series::verify_reference_tables();
  report.series_report_json = verification.to_json();
  const auto exp_str = [](int slope, int intercept) {
    std::string s = slope == 1 ? "b" : slope == -1 ? "-b" : std::to_string(slope) + "b";
    if (intercept != 0) s += (intercept > 0 ? "+" : "") + std::to_string(intercept);
    return s;
  };
  for (const auto& entry : verification.entries) {
    if (entry.status == "ENGINE_ONLY") continue;
    CheckResult check;
    check.name = "series.coeff." + entry.table + ".k" + std::to_string(entry.k);
    check.pass = entry.status != "FAIL";
    check.detail = entry.status + ": reference (" + entry.expected_coeff +
                   ")/m^(" +
                   exp_str(entry.expected_m_slope, entry.expected_m_intercept) +
                   ") vs engine (" + entry.engine_coeff + ")/m^(" +
                   exp_str(entry.engine_m_slope, entry.engine_m_intercept) + ")";
    if (!entry.note.empty()) check.detail += " [" + entry.note + "]";
    report.checks.push_back(check);
    if (check.pass) {
      ++report.n_pass;
    } else {
      ++report.n_fail;
    }
  }

  {
    const HeavyTailSpec spec = validate_expheavy_spec(3.0, 1.0);
    const series::AsymptoticSeries tail_series =
        series::boundary_series(series::reference_input(0), 3);
    bool ok = true;
    std::ostringstream detail;
    for (double m : {20.0, 50.0, 100.0}) {
      QuadOptions opts;
      opts.rel_tol = 1e-10;
      const double integral =
          integrate_segmented(
              [&](double g) {
                return std::exp(-g * std::pow((m - g) / spec.scale,
                                              spec.shape - 1.0));
              },
              expheavy_integration_breakpoints(spec, m), opts)
              .value;
      const double approx =
          series::series_value(tail_series, spec.shape, spec.scale, m);
      const double rel = std::fabs(approx / integral - 1.0);
      detail << "m=" << m << ": " << fmt(rel) << "  ";
      ok = ok && rel < 1e-4;
    }
    suite.check("series.numeric_vs_quadrature", ok, detail.str());
  }

  {
    // f_op against a central finite difference of term/Q'.
    RandomStream rng(kSelfcheckSeed, "selfcheck.series.fd");
    const double b = 3.0, eta = 1.0, m = 10.0;
    bool ok = true;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      series::TermSig sig;
      sig.p = static_cast<int>(rng.uniform() * 3);
      sig.q0 = static_cast<int>(rng.uniform() * 5) - 2;
      sig.q1 = -static_cast<int>(rng.uniform() * 3);
      sig.r = -static_cast<int>(rng.uniform() * 3);
      sig.e1 = static_cast<int>(rng.uniform() * 3);
      const series::SymbolicTerm term{
          series::BPoly(series::Rational(1 + static_cast<int>(rng.uniform() * 4))),
          sig};
      const series::TermSum applied = series::f_op(series::TermSum(term));
      const double g = 0.3 + rng.uniform() * (m / (b + 1.0) - 0.6);
      const double h = 1e-6 * std::max(1.0, std::fabs(g));
      const auto ratio = [&](double gg) {
        return series::term_value(term, b, eta, m, gg) /
               series::q_prime_value(b, eta, m, gg);
      };
      const double fd = (ratio(g + h) - ratio(g - h)) / (2.0 * h);
      const double sym = series::sum_value(applied, b, eta, m, g);
      const double rel =
          std::fabs(fd - sym) / std::max({std::fabs(fd), std::fabs(sym), 1e-12});
      worst = std::max(worst, rel);
      ok = ok && rel < 1e-5;
    }
    suite.check("series.operator_identity", ok,
                "worst relative gap between f_op and finite difference = " +
                    fmt(worst));
  }

  {
    const auto once = series::boundary_series(series::reference_input(0), 3);
    const auto twice = series::boundary_series(series::reference_input(0), 3);
    bool identical = once.entries.size() == twice.entries.size();
    for (std::size_t i = 0; identical && i < once.entries.size(); ++i) {
      identical = once.entries[i].k == twice.entries[i].k &&
                  once.entries[i].j == twice.entries[i].j &&
                  once.entries[i].coeff == twice.entries[i].coeff;
    }
    suite.check("series.exact_rerun", identical,
                "re-running the engine reproduces identical exact output");
  }
}

}  // namespace

std::string CheckReport::to_json(const std::string& scope) const {
  std::ostringstream os;
  os << "{\"scope\":\"" << scope << "\",\"checks\":[";
  for (std::size_t i = 0; i < checks.size(); ++i) {
    if (i > 0) os << ",";
    std::string detail;
    for (char c : checks[i].detail) {
      if (c == '"' || c == '\\') detail.push_back('\\');
      detail.push_back(c);
    }
    os << "{\"name\":\"" << checks[i].name << "\",\"status\":\""
       << (checks[i].pass ? "PASS" : "FAIL") << "\",\"detail\":\"" << detail
       << "\"}";
  }
  os << "],\"n_pass\":" << n_pass << ",\"n_fail\":" << n_fail
     << ",\"all_pass\":" << (n_fail == 0 ? "true" : "false");
  if (!series_report_json.empty()) {
    os << ",\"series_coefficients\":" << series_report_json;
  }
  os << "}";
  return os.str();
}

CheckReport run_selfcheck(const std::string& scope) {
  Suite suite;
  CheckReport report;
  const bool all = scope == "all";
  if (!all && scope != "gaussian" && scope != "expheavy" && scope != "series") {
    fail(ErrorCode::InvalidArgument,
         "scope must be gaussian, expheavy, series or all");
  }
  if (all || scope == "gaussian") gaussian_scope(suite);
  if (all || scope == "expheavy") expheavy_scope(suite);
  report = suite.take();
  if (all || scope == "series") {
    Suite series_suite;
    series_scope(series_suite, report);
    CheckReport extra = series_suite.take();
    for (auto& c : extra.checks) report.checks.push_back(std::move(c));
    report.n_pass += extra.n_pass;
    report.n_fail += extra.n_fail;
  }
  return report;
}

}  // namespace goodhart
