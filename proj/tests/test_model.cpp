#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "core/errors.hpp"
#include "core/model.hpp"
#include "core/quadrature.hpp"
#include "core/selfcheck.hpp"

using namespace goodhart;

TEST_CASE("gaussian spec validation") {
  const CovarianceSpec independent = validate_gaussian_spec(1, 1, 0);
  CHECK(independent.s() == 2.0);
  CHECK(independent.variance_warning);  // a <= b

  const CovarianceSpec coupled = validate_gaussian_spec(2, 1, 0.5);
  CHECK(coupled.s() == 4.0);
  CHECK_FALSE(coupled.variance_warning);

  CHECK_THROWS_AS(validate_gaussian_spec(1, 1, 1), Error);   // c^2 = ab
  CHECK_THROWS_AS(validate_gaussian_spec(1, 1, -1.2), Error);
  CHECK_THROWS_AS(validate_gaussian_spec(0, 1, 0), Error);
  CHECK_THROWS_AS(validate_gaussian_spec(1, -2, 0), Error);
  try {
    validate_gaussian_spec(-1, 1, 0);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonPositiveVariance);
  }
  try {
    validate_gaussian_spec(2, 2, 2);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateCovariance);
  }
}

TEST_CASE("expheavy spec validation") {
  CHECK_THROWS_AS(validate_expheavy_spec(1.0, 1.0), Error);
  CHECK_THROWS_AS(validate_expheavy_spec(3.0, 0.0), Error);
  const HeavyTailSpec spec = validate_expheavy_spec(2.5, 2.0);
  CHECK(spec.shape == 2.5);
  CHECK(spec.scale == 2.0);
}

TEST_CASE("gaussian joint density reference points") {
  const CovarianceSpec unit = validate_gaussian_spec(1, 1, 0);
  CHECK(joint_density_gaussian(unit, 0, 0) ==
        doctest::Approx(1.0 / (2.0 * std::numbers::pi)).epsilon(1e-14));
  CHECK(joint_density_gaussian(unit, 1, 1) ==
        doctest::Approx(std::exp(-1.0) / (2.0 * std::numbers::pi)).epsilon(1e-14));
  const CovarianceSpec coupled = validate_gaussian_spec(2, 1, 0.5);
  CHECK(joint_density_gaussian(coupled, 0, 0) ==
        doctest::Approx(1.0 / (2.0 * std::numbers::pi * std::sqrt(1.75)))
            .epsilon(1e-14));
}

TEST_CASE("gaussian density argument symmetry") {
  // f_{(a,b,c)}(g, x) = f_{(b,a,c)}(x, g) exactly, including rounding.
  const double points[][2] = {{0.3, -1.2}, {1.5, 2.0}, {-0.7, 0.1}, {2.2, -2.2}};
  const double abc[][3] = {{1, 1, 0}, {2, 1, 0.5}, {1.5, 3, -1.1}};
  for (const auto& s : abc) {
    const CovarianceSpec lhs = validate_gaussian_spec(s[0], s[1], s[2]);
    const CovarianceSpec rhs = validate_gaussian_spec(s[1], s[0], s[2]);
    for (const auto& p : points) {
      CHECK(joint_density_gaussian(lhs, p[0], p[1]) ==
            joint_density_gaussian(rhs, p[1], p[0]));
    }
  }
}

TEST_CASE("expheavy joint density support and corner value") {
  const HeavyTailSpec spec = validate_expheavy_spec(3, 1);
  CHECK(joint_density_expheavy(spec, -0.1, 2.0) == 0.0);
  CHECK(joint_density_expheavy(spec, 0.0, 2.0) == 0.0);
  CHECK(joint_density_expheavy(spec, 1.0, 0.999) == 0.0);
  // e^{-1} * 1 * e^0 * 1 * (b-1) at the support corner (g, x) = (1, 1)
  CHECK(joint_density_expheavy(spec, 1.0, 1.0) ==
        doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-13));
}

TEST_CASE("joint densities integrate to one") {
  CHECK(gaussian_density_mass_quad2d(validate_gaussian_spec(2, 1, 0.5), 1e-8) ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(expheavy_density_mass_quad2d(validate_expheavy_spec(3, 1), 1e-9) ==
        doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("expheavy marginal tail of xi") {
  const HeavyTailSpec spec3 = validate_expheavy_spec(3, 1);
  CHECK(marginal_tail_xi_expheavy(spec3, 1.0) == 1.0);
  CHECK(marginal_tail_xi_expheavy(spec3, 0.2) == 1.0);
  CHECK(marginal_tail_xi_expheavy(spec3, 10.0) ==
        doctest::Approx(1e-2).epsilon(1e-13));
  const HeavyTailSpec spec25 = validate_expheavy_spec(2.5, 2);
  CHECK(marginal_tail_xi_expheavy(spec25, 4.0) ==
        doctest::Approx(0.35355339059327373).epsilon(1e-13));

  // Quadrature oracle: integrate the conditional survival against the
  // exponential goal marginal.
  for (double x : {1.7, 3.0, 10.0}) {
    const QuadResult q = integrate(
        [&](double g) {
          return std::exp(-g) * conditional_survival_xi(spec3, g, x);
        },
        0.0, 60.0, {.rel_tol = 1e-11});
    CHECK(marginal_tail_xi_expheavy(spec3, x) ==
          doctest::Approx(q.value).epsilon(1e-9));
  }
}

TEST_CASE("heavy-tail conditional inverse CDF") {
  const HeavyTailSpec spec = validate_expheavy_spec(3, 1);
  // e = 0 maps to the support edge exactly.
  CHECK(xi_from_exponential(spec, 0.7, 0.0) == spec.scale);
  CHECK(xi_from_exponential(validate_expheavy_spec(2.2, 1.75), 1.3, 0.0) ==
        1.75);

  // Empirical conditional survival against the closed form, 4 binomial
  // standard errors.
  RandomStream rng(2024, "test.invcdf");
  for (double g : {0.5, 1.0, 5.0}) {
    const int n = 200000;
    int beyond[3] = {0, 0, 0};
    const double xs[3] = {spec.scale, 2.0 * spec.scale, 5.0 * spec.scale};
    for (int i = 0; i < n; ++i) {
      const double xi = xi_from_exponential(spec, g, rng.exponential());
      for (int k = 0; k < 3; ++k) beyond[k] += xi > xs[k] ? 1 : 0;
    }
    // P(xi > eta) = 1 by construction (draws sit strictly above the edge).
    CHECK(beyond[0] == n);
    for (int k = 1; k < 3; ++k) {
      const double expected = conditional_survival_xi(spec, g, xs[k]);
      const double se = std::sqrt(expected * (1.0 - expected) / n) + 1e-12;
      CHECK(std::fabs(static_cast<double>(beyond[k]) / n - expected) <
            4.0 * se);
    }
  }
}

TEST_CASE("gaussian sampler matches its covariance") {
  const int n = 1000000;
  SUBCASE("independent components") {
    const CovarianceSpec spec = validate_gaussian_spec(1, 1, 0);
    RandomStream rng(7, "test.sampler");
    double sgg = 0, sxx = 0, sgx = 0;
    for (int i = 0; i < n; ++i) {
      const SamplePair p = sample_gaussian_pair(spec, rng);
      sgg += p.g * p.g;
      sxx += p.xi * p.xi;
      sgx += p.g * p.xi;
    }
    CHECK(std::fabs(sgg / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
    CHECK(std::fabs(sxx / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
    CHECK(std::fabs(sgx / n - 0.0) < 4.0 * std::sqrt(1.0 / n));
  }
  SUBCASE("Var M = a + b + 2c") {
    const CovarianceSpec spec = validate_gaussian_spec(2, 1, 0.5);
    RandomStream rng(8, "test.sampler");
    double sm = 0, smm = 0;
    for (int i = 0; i < n; ++i) {
      const SamplePair p = sample_gaussian_pair(spec, rng);
      CHECK(p.m_value == p.g + p.xi);
      sm += p.m_value;
      smm += p.m_value * p.m_value;
    }
    const double var_m = smm / n - (sm / n) * (sm / n);
    CHECK(std::fabs(var_m - 4.0) < 4.0 * std::sqrt(2.0 * 16.0 / n));
  }
  SUBCASE("strong negative coupling") {
    const CovarianceSpec spec = validate_gaussian_spec(1, 1, -0.9);
    RandomStream rng(9, "test.sampler");
    double sgg = 0, sxx = 0, sgx = 0;
    for (int i = 0; i < n; ++i) {
      const SamplePair p = sample_gaussian_pair(spec, rng);
      sgg += p.g * p.g;
      sxx += p.xi * p.xi;
      sgx += p.g * p.xi;
    }
    const double corr = sgx / std::sqrt(sgg * sxx);
    // SE of the sample correlation ~ (1 - rho^2)/sqrt(n)
    CHECK(std::fabs(corr + 0.9) < 4.0 * (1.0 - 0.81) / std::sqrt(n));
  }
}

TEST_CASE("expheavy sampler marginals") {
  const HeavyTailSpec spec = validate_expheavy_spec(3, 1);
  RandomStream rng(11, "test.sampler");
  const int n = 1000000;
  double sum_g = 0;
  int beyond2 = 0;
  for (int i = 0; i < n; ++i) {
    const SamplePair p = sample_expheavy_pair(spec, rng);
    CHECK(p.xi >= spec.scale);
    CHECK(p.g > 0.0);
    sum_g += p.g;
    beyond2 += p.xi > 2.0 ? 1 : 0;
  }
  // P(xi > 2) = (1/2)^(b-1) = 0.25
  const double p2 = static_cast<double>(beyond2) / n;
  CHECK(std::fabs(p2 - 0.25) < 4.0 * std::sqrt(0.25 * 0.75 / n));
  CHECK(std::fabs(sum_g / n - 1.0) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("samplers are deterministic under seed") {
  const ModelSpec models[] = {ModelSpec{validate_gaussian_spec(2, 1, 0.5)},
                              ModelSpec{validate_expheavy_spec(3, 1)}};
  for (const auto& model : models) {
    RandomStream a(42, "det"), b(42, "det");
    for (int i = 0; i < 1000; ++i) {
      const SamplePair pa = sample_pair(model, a);
      const SamplePair pb = sample_pair(model, b);
      CHECK(pa.g == pb.g);
      CHECK(pa.xi == pb.xi);
    }
    RandomStream c(43, "det");
    bool any_different = false;
    RandomStream a2(42, "det");
    for (int i = 0; i < 1000; ++i) {
      any_different |= sample_pair(model, a2).g != sample_pair(model, c).g;
    }
    CHECK(any_different);
  }
}

namespace {

// Empirical CDF of M vs the quadrature CDF on a fixed grid, within the
// Dvoretzky-Kiefer-Wolfowitz band at confidence 0.999.
void dkw_check(const ModelSpec& model, const std::vector<double>& grid,
               const std::function<double(double)>& quad_cdf) {
  RandomStream rng(123, "test.dkw");
  const std::size_t n = 100000;
  std::vector<double> samples(n);
  for (auto& v : samples) v = sample_pair(model, rng).m_value;
  std::sort(samples.begin(), samples.end());
  const double band = std::sqrt(std::log(2.0 / 0.001) / (2.0 * n));
  for (double t : grid) {
    const double emp =
        static_cast<double>(std::upper_bound(samples.begin(), samples.end(), t) -
                            samples.begin()) /
        n;
    CHECK(std::fabs(emp - quad_cdf(t)) < band);
  }
}

}  // namespace

TEST_CASE("sampler/density agreement (DKW)") {
  SUBCASE("gaussian") {
    const CovarianceSpec spec = validate_gaussian_spec(2, 1, 0.5);
    std::vector<double> grid;
    for (int i = 0; i < 20; ++i) grid.push_back((-3.0 + 6.0 * i / 19.0) * 2.0);
    dkw_check(ModelSpec{spec}, grid, [&](double t) {
      return 1.0 - gaussian_moments_quad2d(spec, t, 1e-9).tail;
    });
  }
  SUBCASE("expheavy") {
    const HeavyTailSpec spec = validate_expheavy_spec(3, 1);
    const std::vector<double> grid = {1.1, 1.3, 1.5, 1.8, 2.1, 2.5, 3.0,
                                      3.6, 4.3, 5.0, 6.0, 7.2, 8.6, 10.0,
                                      13.0, 16.0, 20.0, 26.0, 35.0, 50.0};
    dkw_check(ModelSpec{spec}, grid, [&](double t) {
      return 1.0 -
             expheavy_conditional_moments_quad(spec, t, 1e-9).tail_prob;
    });
  }
}
