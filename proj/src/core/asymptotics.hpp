#pragma once

// Closed-form asymptotic expansions of the conditional moments, evaluated
// as pure double-precision formulas of the spec and m.  No sampling, no
// quadrature; the exact-coefficient ground truth lives in the series
// engine, which the tests play against these formulas.
//
// Every field carries the magnitude of its first omitted term as a
// heuristic error indicator (the expansions are asymptotic; there is no
// rigorous remainder at fixed m).

#include "core/model.hpp"
#include "core/oracle.hpp"

namespace goodhart {

struct AsymptoticMoments {
  double tail_prob = 0, mean_g = 0, mean_xi = 0, second_g = 0, cross = 0,
         var_g = 0, var_xi = 0, cov_gm = 0, corr_gm = 0;
  // First-omitted-term magnitudes, per field.
  double tail_prob_next = 0, mean_g_next = 0, mean_xi_next = 0,
         second_g_next = 0, cross_next = 0, var_g_next = 0, var_xi_next = 0,
         cov_gm_next = 0, corr_gm_next = 0;
  // Evaluated in log space; finite where tail_prob itself underflows.
  double log_tail_prob = 0;
  unsigned valid = 0;
  int order = 0;
};

// Partial sum of exp(-x^2)/(2x) * sum_n (-1)^n (2n-1)!!/(2^n x^(2n)).
// divergence_warning (optional) flags the asymptotic turning point: the
// first omitted term already exceeds the last included one.
// Errors: InvalidArgument (x <= 0 or n_terms < 1).
double gaussian_tail_series(double x, int n_terms,
                            bool* divergence_warning = nullptr);

// All nine conditional-moment slots at the printed truncation orders.
// Errors: InvalidArgument (m <= 0).
AsymptoticMoments gaussian_asymptotic_moments(const CovarianceSpec& spec,
                                              double m);

// (a+c)sqrt(a+b+2c)/sqrt(ab-c^2): coefficient of the 1/m correlation decay.
double gaussian_corr_coefficient(const CovarianceSpec& spec);

// tail_prob, mean_g and (shape > 2) mean_xi to the requested order in 1..4.
// Errors: InvalidArgument (m <= eta, bad order).
AsymptoticMoments expheavy_asymptotic_moments(const HeavyTailSpec& spec,
                                              double m, int order);

// As above but just the discrepancy mean; rejects shape <= 2 loudly.
// Errors: ShapeTooSmall.
double expheavy_mean_xi_asymptotic(const HeavyTailSpec& spec, double m,
                                   int order);

AsymptoticMoments asymptotic_moments(const ModelSpec& model, double m,
                                     int order);

}  // namespace goodhart
