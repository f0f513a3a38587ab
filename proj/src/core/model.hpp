#pragma once

// The two goal/discrepancy models: parameter records, joint densities and
// exact samplers.  Everything downstream (oracles, expansions, Monte Carlo)
// consumes these.  M = G + xi throughout.

#include <variant>

#include "core/rng.hpp"

namespace goodhart {

struct CovarianceSpec {
  double a;  // Var G
  double b;  // Var xi
  double c;  // Cov(G, xi)
  bool variance_warning = false;  // set when a <= b (benign-regime hypothesis)

  double s() const { return a + b + 2.0 * c; }        // Var M
  double det() const { return a * b - c * c; }        // |Sigma|
  double beta() const { return (a + c) / s(); }       // regression of G on M
  double residual_var() const { return det() / s(); } // Var(G - beta*M)
};

struct HeavyTailSpec {
  double shape;  // b > 1; conditional-mean operations additionally need b > 2
  double scale;  // eta > 0
};

using ModelSpec = std::variant<CovarianceSpec, HeavyTailSpec>;

struct SamplePair {
  double g;
  double xi;
  double m_value;  // g + xi, cached
};

// Errors: NonPositiveVariance, DegenerateCovariance.
CovarianceSpec validate_gaussian_spec(double a, double b, double c);

// Errors: ShapeTooSmall (shape <= 1), InvalidArgument (scale <= 0).
HeavyTailSpec validate_expheavy_spec(double shape, double scale);

double joint_density_gaussian(const CovarianceSpec& spec, double g, double x);
double joint_density_expheavy(const HeavyTailSpec& spec, double g, double x);

// P(xi > x) = min(1, (eta/x)^(b-1)).
double marginal_tail_xi_expheavy(const HeavyTailSpec& spec, double x);

// Conditional survival P(xi > x | G = g) on x >= eta.
double conditional_survival_xi(const HeavyTailSpec& spec, double g, double x);

// Inverse of the conditional survival: the xi with
// P(xi > . | G = g) = exp(-e); e = 0 maps to the support edge eta.
double xi_from_exponential(const HeavyTailSpec& spec, double g, double e);

// As above but truncated to xi > lower (lower >= eta).
double xi_from_exponential_truncated(const HeavyTailSpec& spec, double g,
                                     double lower, double e);

SamplePair sample_gaussian_pair(const CovarianceSpec& spec, RandomStream& rng);
SamplePair sample_expheavy_pair(const HeavyTailSpec& spec, RandomStream& rng);
SamplePair sample_pair(const ModelSpec& model, RandomStream& rng);

double joint_density(const ModelSpec& model, double g, double x);

// Lower edge of M's support: -inf (Gaussian) or eta (heavy tail).
double m_support_lower(const ModelSpec& model);

}  // namespace goodhart
