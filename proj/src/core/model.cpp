#include "core/model.hpp"

#include <cmath>
#include <numbers>

#include "core/errors.hpp"

namespace goodhart {

CovarianceSpec validate_gaussian_spec(double a, double b, double c) {
  if (!(a > 0.0) || !(b > 0.0)) {
    fail(ErrorCode::NonPositiveVariance,
         "gaussian spec requires Var G > 0 and Var xi > 0");
  }
  if (!(a * b - c * c > 0.0)) {
    fail(ErrorCode::DegenerateCovariance,
         "gaussian spec requires cov^2 < Var G * Var xi");
  }
  CovarianceSpec spec{a, b, c};
  spec.variance_warning = !(a > b);
  return spec;
}

HeavyTailSpec validate_expheavy_spec(double shape, double scale) {
  if (!(shape > 1.0)) {
    fail(ErrorCode::ShapeTooSmall, "heavy-tail spec requires shape > 1");
  }
  if (!(scale > 0.0)) {
    fail(ErrorCode::InvalidArgument, "heavy-tail spec requires scale > 0");
  }
  return HeavyTailSpec{shape, scale};
}

double joint_density_gaussian(const CovarianceSpec& spec, double g, double x) {
  const double det = spec.det();
  const double q = (spec.b * g * g - 2.0 * spec.c * g * x + spec.a * x * x) / det;
  return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(det));
}

double joint_density_expheavy(const HeavyTailSpec& spec, double g, double x) {
  if (g <= 0.0 || x < spec.scale) return 0.0;
  const double bm1 = spec.shape - 1.0;
  const double u = x / spec.scale;
  // exp(-g) * g * exp(-g(u^(b-1) - 1)) * x^(b-2) (b-1) / eta^(b-1)
  const double log_pow = (spec.shape - 2.0) * std::log(x) - bm1 * std::log(spec.scale);
  return g * bm1 * std::exp(-g * std::pow(u, bm1) + log_pow);
}

double marginal_tail_xi_expheavy(const HeavyTailSpec& spec, double x) {
  if (x <= spec.scale) return 1.0;
  return std::pow(spec.scale / x, spec.shape - 1.0);
}

double conditional_survival_xi(const HeavyTailSpec& spec, double g, double x) {
  if (x <= spec.scale) return 1.0;
  const double bm1 = spec.shape - 1.0;
  return std::exp(-g * (std::pow(x / spec.scale, bm1) - 1.0));
}

double xi_from_exponential(const HeavyTailSpec& spec, double g, double e) {
  const double bm1 = spec.shape - 1.0;
  return spec.scale * std::exp(std::log1p(e / g) / bm1);
}

double xi_from_exponential_truncated(const HeavyTailSpec& spec, double g,
                                     double lower, double e) {
  const double bm1 = spec.shape - 1.0;
  const double base = std::pow(lower / spec.scale, bm1);
  return spec.scale * std::pow(base + e / g, 1.0 / bm1);
}

SamplePair sample_gaussian_pair(const CovarianceSpec& spec, RandomStream& rng) {
  // Lower-triangular factor of Sigma applied to two independent N(0,1).
  const double l11 = std::sqrt(spec.a);
  const double l21 = spec.c / l11;
  const double l22 = std::sqrt(spec.b - l21 * l21);
  const double z1 = rng.normal();
  const double z2 = rng.normal();
  const double g = l11 * z1;
  const double xi = l21 * z1 + l22 * z2;
  return SamplePair{g, xi, g + xi};
}

SamplePair sample_expheavy_pair(const HeavyTailSpec& spec, RandomStream& rng) {
  const double g = rng.exponential();
  const double xi = xi_from_exponential(spec, g, rng.exponential());
  return SamplePair{g, xi, g + xi};
}

SamplePair sample_pair(const ModelSpec& model, RandomStream& rng) {
  if (const auto* gs = std::get_if<CovarianceSpec>(&model)) {
    return sample_gaussian_pair(*gs, rng);
  }
  return sample_expheavy_pair(std::get<HeavyTailSpec>(model), rng);
}

double joint_density(const ModelSpec& model, double g, double x) {
  if (const auto* gs = std::get_if<CovarianceSpec>(&model)) {
    return joint_density_gaussian(*gs, g, x);
  }
  return joint_density_expheavy(std::get<HeavyTailSpec>(model), g, x);
}

double m_support_lower(const ModelSpec& model) {
  if (std::holds_alternative<CovarianceSpec>(model)) {
    return -std::numeric_limits<double>::infinity();
  }
  return std::get<HeavyTailSpec>(model).scale;
}

}  // namespace goodhart
