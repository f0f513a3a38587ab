#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "core/errors.hpp"
#include "core/mc.hpp"
#include "core/oracle.hpp"

using namespace goodhart;

namespace {

const ModelSpec kGauss21{validate_gaussian_spec(2, 1, 0.5)};
const ModelSpec kGaussUnit{validate_gaussian_spec(1, 1, 0)};
const ModelSpec kHeavy31{validate_expheavy_spec(3, 1)};

bool within(double value, double target, double se, double n_sigma) {
  return std::fabs(value - target) <= n_sigma * se;
}

}  // namespace

TEST_CASE("rejection at a vacuous threshold reproduces unconditional moments") {
  SUBCASE("gaussian, m = -1e9") {
    const ConditionalEstimate est =
        estimate_rejection(kGaussUnit, -1e9, Statistic::GoalMean, 200000, 5);
    CHECK(est.n_accepted == 200000.0);
    CHECK(within(est.value, 0.0, est.std_error, 4.0));
    const ConditionalEstimate tail =
        estimate_rejection(kGaussUnit, -1e9, Statistic::TailProb, 10000, 5);
    CHECK(tail.value == 1.0);
  }
  SUBCASE("heavy tail, m = 0 (below the support of M)") {
    const ConditionalEstimate goal =
        estimate_rejection(kHeavy31, 0.0, Statistic::GoalMean, 200000, 6);
    CHECK(within(goal.value, 1.0, goal.std_error, 4.0));
    const ConditionalEstimate noise =
        estimate_rejection(kHeavy31, 0.0, Statistic::NoiseMean, 200000, 6);
    // E[xi] = eta (b-1)/(b-2) = 2
    CHECK(within(noise.value, 2.0, noise.std_error, 4.0));
  }
}

TEST_CASE("rejection matches the oracles at moderate thresholds") {
  SUBCASE("gaussian (2,1,0.5) at m = 2") {
    const ConditionalMoments oracle = gaussian_conditional_moments_exact(
        std::get<CovarianceSpec>(kGauss21), 2.0);
    const ConditionalEstimate est =
        estimate_rejection(kGauss21, 2.0, Statistic::GoalMean, 1000000, 7);
    CHECK(est.method == McMethod::Rejection);
    CHECK(within(est.value, oracle.mean_g, est.std_error, 4.0));
    const ConditionalEstimate tail =
        estimate_rejection(kGauss21, 2.0, Statistic::TailProb, 1000000, 7);
    CHECK(within(tail.value, oracle.tail_prob, tail.std_error, 4.0));
  }
  SUBCASE("heavy tail (3,1) at m = 20, NoiseMean, budget 1e7") {
    const ConditionalMoments oracle = expheavy_conditional_moments_quad(
        std::get<HeavyTailSpec>(kHeavy31), 20.0, 1e-10);
    const ConditionalEstimate est =
        estimate_rejection(kHeavy31, 20.0, Statistic::NoiseMean, 10000000, 8);
    CHECK(within(est.value, oracle.mean_xi, est.std_error, 4.0));
  }
}

TEST_CASE("rejection reports insufficient acceptance in the deep tail") {
  try {
    estimate_rejection(kGaussUnit, 10.0, Statistic::GoalMean, 100000, 9);
    FAIL("expected InsufficientAcceptance");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientAcceptance);
  }
  CHECK_THROWS_AS(
      estimate_rejection(kGaussUnit, 0.0, Statistic::GoalMean, 999, 9), Error);
}

TEST_CASE("gaussian importance sampling against frozen oracles") {
  SUBCASE("tail probability at m = 8, spec (1,1,0)") {
    const ConditionalEstimate est = estimate_importance_gaussian(
        std::get<CovarianceSpec>(kGaussUnit), 8.0, Statistic::TailProb, 1000000,
        11);
    CHECK(est.method == McMethod::ImportanceShift);
    // 1 - Phi(8/sqrt(2)), high-precision reference
    CHECK(within(est.value, 7.7086289501400094e-9, est.std_error, 4.0));
    CHECK(est.std_error < 7.7086289501400094e-9 * 0.01);
  }
  SUBCASE("goal mean at m = 12, spec (2,1,0.5)") {
    const ConditionalEstimate est = estimate_importance_gaussian(
        std::get<CovarianceSpec>(kGauss21), 12.0, Statistic::GoalMean, 1000000,
        12);
    CHECK(within(est.value, 7.6981032556807486, est.std_error, 4.0));
    CHECK(est.n_accepted > 30.0);
  }
  SUBCASE("correlation at m = 10, spec (1,1,0)") {
    const ConditionalEstimate est = estimate_importance_gaussian(
        std::get<CovarianceSpec>(kGaussUnit), 10.0, Statistic::Correlation,
        2000000, 13);
    CHECK(est.value > 0.0);
    CHECK(est.value < 0.25);
    CHECK(within(est.value, 0.13272957729999406, est.std_error, 4.0));
  }
  SUBCASE("m <= 0 is rejected") {
    CHECK_THROWS_AS(
        estimate_importance_gaussian(std::get<CovarianceSpec>(kGaussUnit), -1.0,
                                     Statistic::GoalMean, 10000, 14),
        Error);
  }
}

TEST_CASE("heavy-tail importance sampling against the quadrature oracle") {
  const HeavyTailSpec spec = std::get<HeavyTailSpec>(kHeavy31);
  const ConditionalMoments oracle =
      expheavy_conditional_moments_quad(spec, 100.0, 1e-10);
  SUBCASE("tail probability at m = 100") {
    const ConditionalEstimate est = estimate_importance_expheavy(
        spec, 100.0, Statistic::TailProb, 2000000, 21);
    CHECK(est.method == McMethod::ImportanceTail);
    CHECK(within(est.value, oracle.tail_prob, est.std_error, 4.0));
    // Leading term of the tail expansion: eta^(b-1)/m^(b-1) = 1e-4 within 2%.
    CHECK(std::fabs(est.value - 1e-4) < 0.02 * 1e-4);
  }
  SUBCASE("noise mean at m = 100: capture ratio near 2") {
    const ConditionalEstimate est = estimate_importance_expheavy(
        spec, 100.0, Statistic::NoiseMean, 2000000, 22);
    CHECK(within(est.value, oracle.mean_xi, est.std_error, 4.0));
    CHECK(within(est.value / 100.0, 2.0, est.std_error / 100.0, 5.0));
  }
  SUBCASE("goal mean at m = 100: 1e-4 scale") {
    const ConditionalEstimate est = estimate_importance_expheavy(
        spec, 100.0, Statistic::GoalMean, 2000000, 23);
    CHECK(within(est.value, oracle.mean_g, est.std_error, 4.0));
    CHECK(est.value > 0.2e-4);
    CHECK(est.value < 5e-4);
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_AS(estimate_importance_expheavy(spec, 1.5, Statistic::GoalMean,
                                                 10000, 24),
                    Error);
    try {
      estimate_importance_expheavy(validate_expheavy_spec(1.9, 1.0), 50.0,
                                   Statistic::NoiseMean, 10000, 24);
      FAIL("expected ShapeTooSmall");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ShapeTooSmall);
    }
  }
  SUBCASE("degenerate weights at a starved budget") {
    // At m = 100 the effective sample size is ~2e-4 per proposal; the
    // minimum budget leaves it far below the reliability floor.
    try {
      estimate_importance_expheavy(spec, 100.0, Statistic::GoalMean, 1000, 25);
      FAIL("expected DegenerateWeights");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateWeights);
    }
  }
}

TEST_CASE("rejection and importance sampling agree where both work") {
  const Statistic stats[] = {Statistic::GoalMean, Statistic::NoiseMean,
                             Statistic::GoalSecondMoment, Statistic::CrossMoment,
                             Statistic::GoalVariance, Statistic::Correlation,
                             Statistic::TailProb};
  SUBCASE("gaussian at 1 sigma of M") {
    for (const Statistic stat : stats) {
      const ConditionalEstimate rej =
          estimate_rejection(kGauss21, 2.0, stat, 1000000, 31);
      const ConditionalEstimate imp = estimate_importance_gaussian(
          std::get<CovarianceSpec>(kGauss21), 2.0, stat, 1000000, 32);
      const double se = std::hypot(rej.std_error, imp.std_error);
      CHECK(std::fabs(rej.value - imp.value) < 4.0 * se);
    }
  }
  SUBCASE("heavy tail at m = 10 (acceptance ~1e-2)") {
    for (const Statistic stat :
         {Statistic::GoalMean, Statistic::NoiseMean, Statistic::TailProb}) {
      const ConditionalEstimate rej =
          estimate_rejection(kHeavy31, 10.0, stat, 2000000, 33);
      const ConditionalEstimate imp = estimate_importance_expheavy(
          std::get<HeavyTailSpec>(kHeavy31), 10.0, stat, 2000000, 34);
      const double se = std::hypot(rej.std_error, imp.std_error);
      CHECK(std::fabs(rej.value - imp.value) < 4.0 * se);
    }
  }
}

TEST_CASE("seed determinism and worker-count independence") {
  setenv("GOODHART_THREADS", "1", 1);
  const ConditionalEstimate serial = estimate_importance_gaussian(
      std::get<CovarianceSpec>(kGauss21), 6.0, Statistic::GoalMean, 300000, 41);
  setenv("GOODHART_THREADS", "7", 1);
  const ConditionalEstimate parallel = estimate_importance_gaussian(
      std::get<CovarianceSpec>(kGauss21), 6.0, Statistic::GoalMean, 300000, 41);
  unsetenv("GOODHART_THREADS");
  CHECK(serial.value == parallel.value);
  CHECK(serial.std_error == parallel.std_error);

  const ConditionalEstimate again = estimate_importance_gaussian(
      std::get<CovarianceSpec>(kGauss21), 6.0, Statistic::GoalMean, 300000, 41);
  CHECK(serial.value == again.value);
  const ConditionalEstimate other_seed = estimate_importance_gaussian(
      std::get<CovarianceSpec>(kGauss21), 6.0, Statistic::GoalMean, 300000, 42);
  CHECK(serial.value != other_seed.value);

  const ConditionalEstimate rej1 =
      estimate_rejection(kHeavy31, 5.0, Statistic::GoalMean, 300000, 43);
  const ConditionalEstimate rej2 =
      estimate_rejection(kHeavy31, 5.0, Statistic::GoalMean, 300000, 43);
  CHECK(rej1.value == rej2.value);
}

TEST_CASE("standard errors are calibrated (coverage)") {
  // 120 replications at a modest budget; the acceptance suite runs the
  // full-size version.  Nominal 2-sigma coverage ~95%.
  const CovarianceSpec spec = std::get<CovarianceSpec>(kGaussUnit);
  const double oracle = gaussian_conditional_moments_exact(spec, 8.0).mean_g;
  int covered = 0;
  const int reps = 120;
  for (int i = 0; i < reps; ++i) {
    const ConditionalEstimate est = estimate_importance_gaussian(
        spec, 8.0, Statistic::GoalMean, 50000, 1000 + i);
    if (std::fabs(est.value - oracle) <= 2.0 * est.std_error) ++covered;
    CHECK(est.n_accepted <= static_cast<double>(est.budget_used));
  }
  CHECK(covered >= static_cast<int>(0.88 * reps));
}

TEST_CASE("delta-method correlation errors are calibrated") {
  // The correlation standard error rides on the full 5-moment covariance;
  // check its 2-sigma coverage against the exact conditional correlation.
  const CovarianceSpec spec = std::get<CovarianceSpec>(kGauss21);
  const double oracle = gaussian_conditional_moments_exact(spec, 2.0).corr_gm;
  int covered = 0;
  const int reps = 100;
  for (int i = 0; i < reps; ++i) {
    const ConditionalEstimate est =
        estimate_rejection(kGauss21, 2.0, Statistic::Correlation, 100000,
                           5000 + i);
    if (std::fabs(est.value - oracle) <= 2.0 * est.std_error) ++covered;
  }
  CHECK(covered >= 87);
}

TEST_CASE("single-pass sweep rows carry consistent statistics") {
  const ConditionalMoments row =
      estimate_sweep_row(kGauss21, 8.0, 500000, 55, McMethod::ImportanceShift);
  const ConditionalMoments oracle = gaussian_conditional_moments_exact(
      std::get<CovarianceSpec>(kGauss21), 8.0);
  CHECK((row.valid & kFieldTailProb) != 0);
  CHECK((row.valid & kFieldCorrGm) != 0);
  CHECK(within(row.mean_g, oracle.mean_g, row.mean_g_err, 4.0));
  CHECK(within(row.tail_prob, oracle.tail_prob, row.tail_prob_err, 4.0));
  CHECK(within(row.corr_gm, oracle.corr_gm, row.corr_gm_err, 4.0));
  CHECK(within(row.var_g, oracle.var_g, row.var_g_err, 4.0));

  // Heavy-tail row at shape <= 2 omits the diverging mean_xi.
  const ConditionalMoments no_xi = estimate_sweep_row(
      ModelSpec{validate_expheavy_spec(1.8, 1.0)}, 3.0, 100000, 56,
      McMethod::Rejection);
  CHECK((no_xi.valid & kFieldMeanXi) == 0);
  CHECK((no_xi.valid & kFieldMeanG) != 0);
}

TEST_CASE("default method choice") {
  CHECK(default_mc_method(kGauss21, 1.0) == McMethod::Rejection);
  CHECK(default_mc_method(kGauss21, 8.0) == McMethod::ImportanceShift);
  CHECK(default_mc_method(kHeavy31, 2.5) == McMethod::Rejection);
  CHECK(default_mc_method(kHeavy31, 20.0) == McMethod::ImportanceTail);
}
