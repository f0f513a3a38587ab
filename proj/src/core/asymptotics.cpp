#include "core/asymptotics.hpp"

#include <cmath>
#include <numbers>

#include "core/errors.hpp"

namespace goodhart {

double gaussian_tail_series(double x, int n_terms, bool* divergence_warning) {
  if (!(x > 0.0)) fail(ErrorCode::InvalidArgument, "tail series needs x > 0");
  if (n_terms < 1) fail(ErrorCode::InvalidArgument, "tail series needs n_terms >= 1");
  const double inv2x2 = 1.0 / (2.0 * x * x);
  double term = 1.0;  // (-1)^n (2n-1)!!/(2^n x^(2n)), n = 0
  double sum = 0.0;
  double last_abs = 0.0;
  for (int n = 0; n < n_terms; ++n) {
    sum += term;
    last_abs = std::fabs(term);
    term *= -(2.0 * n + 1.0) * inv2x2;
  }
  if (divergence_warning != nullptr) {
    *divergence_warning = std::fabs(term) > last_abs;
  }
  return std::exp(-x * x) / (2.0 * x) * sum;
}

double gaussian_corr_coefficient(const CovarianceSpec& spec) {
  return (spec.a + spec.c) * std::sqrt(spec.s()) / std::sqrt(spec.det());
}

AsymptoticMoments gaussian_asymptotic_moments(const CovarianceSpec& spec,
                                              double m) {
  if (!(m > 0.0)) {
    fail(ErrorCode::InvalidArgument, "gaussian expansions need m > 0");
  }
  const double a = spec.a, b = spec.b, c = spec.c;
  const double s = spec.s();
  const double det = spec.det();
  const double ac = a + c, bc = b + c;
  const double m2 = m * m;
  const double x = s / m2;  // expansion variable

  AsymptoticMoments out;
  out.order = 3;
  out.valid = kFieldTailProb | kFieldMeanG | kFieldMeanXi | kFieldSecondG |
              kFieldCross | kFieldVarG | kFieldVarXi | kFieldCovGm |
              kFieldCorrGm;

  const double lead =
      std::sqrt(s) / (std::sqrt(2.0 * std::numbers::pi) * m) *
      std::exp(-m2 / (2.0 * s));
  const double bracket = 1.0 - x + 3.0 * x * x;
  out.tail_prob = lead * bracket;
  out.tail_prob_next = lead * 15.0 * x * x * x;
  out.log_tail_prob = 0.5 * std::log(s) - std::log(m) -
                      0.5 * std::log(2.0 * std::numbers::pi) -
                      m2 / (2.0 * s) + std::log(bracket);

  const double mean_bracket = 1.0 + x - 2.0 * x * x;
  out.mean_g = ac / s * m * mean_bracket;
  out.mean_xi = bc / s * m * mean_bracket;
  const double mean_next_rel = 10.0 * x * x * x;
  out.mean_g_next = std::fabs(ac / s * m) * mean_next_rel;
  out.mean_xi_next = std::fabs(bc / s * m) * mean_next_rel;

  out.cross = ac * bc / (s * s) * m2 + ac * bc / s + c - 2.0 * ac * bc / m2;
  out.cross_next = std::fabs(10.0 * ac * bc * s) / (m2 * m2);
  out.second_g = ac * ac / (s * s) * m2 + ac * ac / s + a - 2.0 * ac * ac / m2;
  out.second_g_next = 10.0 * ac * ac * s / (m2 * m2);

  out.var_g = det / s + ac * ac / m2;
  out.var_g_next = 6.0 * ac * ac * s / (m2 * m2);
  out.var_xi = det / s + bc * bc / m2;
  out.var_xi_next = 6.0 * bc * bc * s / (m2 * m2);
  out.cov_gm = ac * s / m2;
  out.cov_gm_next = std::fabs(6.0 * ac * s * s) / (m2 * m2);

  out.corr_gm = gaussian_corr_coefficient(spec) / m;
  out.corr_gm_next = std::fabs(out.corr_gm) * (3.0 + ac * ac / (2.0 * det)) * x;
  return out;
}

namespace {

// Coefficient polynomials of the heavy-tail expansions, regenerated by the
// series engine (verified in tests); entry i multiplies
// eta^((i+1)(b-1)) / m^((i+1)(b-1)+i).
double tail_coeff(int i, double b) {
  const double B = b - 1.0;
  switch (i) {
    case 0: return 1.0;
    case 1: return 2.0 * B;
    case 2: return 3.0 * B * (3.0 * b - 2.0);
    case 3: return 8.0 * B * (2.0 * b - 1.0) * (4.0 * b - 3.0);
    case 4: return 5.0 * B * (5.0 * b - 4.0) * (5.0 * b - 3.0) * (5.0 * b - 2.0);
  }
  return 0.0;
}

double goal_coeff(int i, double b) {
  const double B = b - 1.0;
  switch (i) {
    case 0: return 1.0;
    case 1: return 4.0 * B;
    case 2: return B * (31.0 * b - 22.0);
    case 3: return 2.0 * B * ((169.0 * b - 227.0) * b + 74.0);
    case 4: return -2.0 * B * (((918.0 * b - 1974.0) * b + 1393.0) * b - 322.0);
  }
  return 0.0;
}

// Entry i multiplies m*(b-1)*X^i with X = eta^(b-1)/m^b; entry 0 is the
// linear growth term m(b-1)/(b-2).
double noise_coeff(int i, double b) {
  const double B = b - 1.0;
  const double bm2 = b - 2.0;
  switch (i) {
    case 0: return 1.0 / bm2;
    case 1: return -2.0 / bm2;
    case 2: return -8.0 * B / bm2;
    case 3: return -2.0 * B * (31.0 * b - 22.0) / bm2;
    case 4: return -4.0 * B * ((169.0 * b - 227.0) * b + 74.0) / bm2;
  }
  return 0.0;
}

}  // namespace

AsymptoticMoments expheavy_asymptotic_moments(const HeavyTailSpec& spec,
                                              double m, int order) {
  if (!(m > spec.scale)) {
    fail(ErrorCode::InvalidArgument, "heavy-tail expansions need m > scale");
  }
  if (order < 1 || order > 4) {
    fail(ErrorCode::InvalidArgument, "heavy-tail expansion order must be 1..4");
  }
  const double b = spec.shape;
  const double lead = std::pow(spec.scale / m, b - 1.0);  // eta^(b-1)/m^(b-1)
  const double x = lead / m;                              // grading step X

  AsymptoticMoments out;
  out.order = order;
  out.valid = kFieldTailProb | kFieldMeanG;

  double xi_pow = 1.0;
  double tail = 0.0, goal = 0.0;
  for (int i = 0; i < order; ++i) {
    tail += tail_coeff(i, b) * xi_pow;
    goal += goal_coeff(i, b) * xi_pow;
    xi_pow *= x;
  }
  out.tail_prob = lead * tail;
  out.mean_g = lead * goal;
  out.log_tail_prob = std::log(out.tail_prob);
  out.tail_prob_next = std::fabs(lead * tail_coeff(order, b) * xi_pow);
  out.mean_g_next = std::fabs(lead * goal_coeff(order, b) * xi_pow);

  if (b > 2.0) {
    double noise = 0.0;
    xi_pow = 1.0;
    for (int i = 0; i < order; ++i) {
      noise += noise_coeff(i, b) * xi_pow;
      xi_pow *= x;
    }
    out.mean_xi = m * (b - 1.0) * noise;
    out.mean_xi_next = std::fabs(m * (b - 1.0) * noise_coeff(order, b) * xi_pow);
    out.valid |= kFieldMeanXi;
  }
  return out;
}

double expheavy_mean_xi_asymptotic(const HeavyTailSpec& spec, double m,
                                   int order) {
  if (!(spec.shape > 2.0)) {
    fail(ErrorCode::ShapeTooSmall,
         "E[xi | M>m] diverges for shape <= 2 (marginal tail exponent <= 1)");
  }
  return expheavy_asymptotic_moments(spec, m, order).mean_xi;
}

AsymptoticMoments asymptotic_moments(const ModelSpec& model, double m,
                                     int order) {
  if (const auto* gs = std::get_if<CovarianceSpec>(&model)) {
    return gaussian_asymptotic_moments(*gs, m);
  }
  return expheavy_asymptotic_moments(std::get<HeavyTailSpec>(model), m, order);
}

}  // namespace goodhart
