#pragma once

// Deterministic ground truth for the conditional moments given M > m:
// exact truncated-bivariate-normal identities for the Gaussian model and
// adaptive quadrature of the reduced 1-D integrals for the heavy-tail
// model (integration over [0, m-eta] plus the analytic exponential
// remainder, never the raw rare-event 2-D region).

#include "core/model.hpp"

namespace goodhart {

enum MomentField : unsigned {
  kFieldTailProb = 1u << 0,
  kFieldMeanG = 1u << 1,
  kFieldMeanXi = 1u << 2,
  kFieldSecondG = 1u << 3,
  kFieldCross = 1u << 4,
  kFieldVarG = 1u << 5,
  kFieldVarXi = 1u << 6,
  kFieldCovGm = 1u << 7,
  kFieldCorrGm = 1u << 8,
};

struct ConditionalMoments {
  double tail_prob = 0, mean_g = 0, mean_xi = 0, second_g = 0, cross = 0,
         var_g = 0, var_xi = 0, cov_gm = 0, corr_gm = 0;
  double tail_prob_err = 0, mean_g_err = 0, mean_xi_err = 0, second_g_err = 0,
         cross_err = 0, var_g_err = 0, var_xi_err = 0, cov_gm_err = 0,
         corr_gm_err = 0;
  double log_tail_prob = 0;  // finite even where tail_prob underflows
  unsigned valid = 0;
};

// Exact: G = beta*M + eps with eps independent of M, plus closed-form
// truncated-normal moments of M through the normal hazard.  All nine fields.
ConditionalMoments gaussian_conditional_moments_exact(const CovarianceSpec& spec,
                                                      double m);

// Quadrature of the proof's reduced integrals; tail_prob, mean_g, and (when
// shape > 2) mean_xi.  tol in (0, 1e-4] is a relative tolerance per integral.
// Errors: InvalidArgument (m <= eta or bad tol), QuadratureNonConvergence.
ConditionalMoments expheavy_conditional_moments_quad(const HeavyTailSpec& spec,
                                                     double m, double tol);

ConditionalMoments oracle_moments(const ModelSpec& model, double m, double tol);

// Breakpoint layout used for the spiked heavy-tail integrands on
// [0, m-eta]; exposed for reuse by tests and cross-checks.
std::vector<double> expheavy_integration_breakpoints(const HeavyTailSpec& spec,
                                                     double m);

}  // namespace goodhart
