#pragma once

// Standard normal tail machinery for the truncated-normal oracle.
//
// survival() goes through erfc, never 1 - CDF (the subtraction is
// catastrophic in the far tail).  Beyond u = 8 the hazard and the
// truncated-variance factor come from the Laplace continued fraction for
// the Mills ratio, arranged so that the leading cancellations happen
// algebraically instead of in floating point; this keeps
// Var(M | M > m) accurate even at u ~ 1e3 where the tail probability
// itself has long since underflowed.

namespace goodhart {

// P(Z > u), relative error ~1e-14 until it underflows (u ~ 38.6).
double normal_survival(double u);

// log P(Z > u), finite for all u.
double normal_log_survival(double u);

double normal_pdf(double u);

// hazard(u) = pdf(u) / survival(u); inverse of the Mills ratio.
double normal_hazard(double u);

// Var(Z | Z > u) = 1 + u*hazard(u) - hazard(u)^2, evaluated stably.
double normal_truncated_var_factor(double u);

}  // namespace goodhart
