#pragma once

// Monte Carlo estimation of E[h(G, xi) | M > m]: plain rejection where the
// event is common, importance sampling where it is rare (tilted-normal
// proposal for the Gaussian model, exact truncated-tail proposal for the
// heavy-tail model).  Conditional estimates are self-normalized ratio
// estimators with delta-method standard errors on the 5-moment vector
// (E[G], E[M], E[G^2], E[M^2], E[GM]); tail probabilities are unnormalized.
//
// The budget is split into fixed-size shards with independently derived
// seeds; partial sums merge in shard order, so results are bit-identical
// for any worker count (GOODHART_THREADS caps parallelism).

#include <cstdint>

#include "core/model.hpp"
#include "core/oracle.hpp"

namespace goodhart {

enum class Statistic {
  GoalMean,
  NoiseMean,
  GoalSecondMoment,
  CrossMoment,
  GoalVariance,
  Correlation,
  TailProb,
};

enum class McMethod { Rejection, ImportanceShift, ImportanceTail };

struct ConditionalEstimate {
  double value = 0.0;
  double std_error = 0.0;
  // Accepted count (rejection) or effective sample size (importance).
  double n_accepted = 0.0;
  std::uint64_t budget_used = 0;
  McMethod method = McMethod::Rejection;
};

// Errors: InvalidArgument (budget < 1e3), InsufficientAcceptance
// (< 30 samples past the threshold; use importance sampling instead).
ConditionalEstimate estimate_rejection(const ModelSpec& model, double m,
                                       Statistic stat, std::uint64_t budget,
                                       std::uint64_t seed);

// Tilted proposal N(m + s/m, s) for M, exact conditional draw of G | M.
// Errors: InvalidArgument (m <= 0), DegenerateWeights (ESS < 30).
ConditionalEstimate estimate_importance_gaussian(const CovarianceSpec& spec,
                                                 double m, Statistic stat,
                                                 std::uint64_t budget,
                                                 std::uint64_t seed);

// Proposal: G from its unconditional exponential, xi from the conditional
// law truncated to xi > m - G; weights are the exact conditional survival.
// Errors: InvalidArgument (m <= 2*eta), ShapeTooSmall (NoiseMean with
// shape <= 2), DegenerateWeights.
ConditionalEstimate estimate_importance_expheavy(const HeavyTailSpec& spec,
                                                 double m, Statistic stat,
                                                 std::uint64_t budget,
                                                 std::uint64_t seed);

ConditionalEstimate estimate_importance(const ModelSpec& model, double m,
                                        Statistic stat, std::uint64_t budget,
                                        std::uint64_t seed);

// Method used by sweeps when none is forced: rejection while the event is
// comfortably common, importance sampling beyond.
McMethod default_mc_method(const ModelSpec& model, double m);

// Everything the sweep schema wants (tail, mean_g, mean_xi, var_g, corr_gm
// with standard errors) from a single sampling pass, so the derived
// quantities share one conditioned sample set.
ConditionalMoments estimate_sweep_row(const ModelSpec& model, double m,
                                      std::uint64_t budget, std::uint64_t seed,
                                      McMethod method);

int goodhart_threads();

}  // namespace goodhart
