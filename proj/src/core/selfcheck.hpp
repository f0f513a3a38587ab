#pragma once

// Invariant suites behind the `verify` command: oracle self-consistency
// against direct 2-D quadrature, expansion convergence, monotone
// over-optimization, sampler agreement, the series-engine coefficient
// regeneration, and the reference regime classifications.

#include <string>
#include <vector>

#include "core/model.hpp"
#include "core/oracle.hpp"

namespace goodhart {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct CheckReport {
  std::vector<CheckResult> checks;
  int n_pass = 0;
  int n_fail = 0;
  std::string series_report_json;  // populated by the series scope
  std::string to_json(const std::string& scope) const;
};

// scope: "gaussian" | "expheavy" | "series" | "all".
// Errors: InvalidArgument on an unknown scope.
CheckReport run_selfcheck(const std::string& scope);

// Direct 2-D adaptive quadrature of the joint density over {g + x > m};
// independent of the oracle's algebraic route.  Used by the selfcheck and
// by tests.
struct Quad2dMoments {
  double tail = 0.0, mean_g = 0.0, mean_xi = 0.0, second_g = 0.0, cross = 0.0;
};
Quad2dMoments gaussian_moments_quad2d(const CovarianceSpec& spec, double m,
                                      double rel_tol);

// 2-D quadrature of a joint density over the whole support (normalization
// check helper).
double gaussian_density_mass_quad2d(const CovarianceSpec& spec, double rel_tol);
double expheavy_density_mass_quad2d(const HeavyTailSpec& spec, double rel_tol);

}  // namespace goodhart
