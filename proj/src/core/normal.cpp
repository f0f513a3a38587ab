#include "core/normal.hpp"

#include <cmath>
#include <numbers>

namespace goodhart {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kCfThreshold = 8.0;

// Tail of the Laplace continued fraction with leading numerator `first`:
//   first / (u + (first+1) / (u + (first+2) / (u + ...)))
// Bottom-up with fixed depth; converges to full precision well before
// depth 128 for u >= 8.
double cf_tail(double u, int first) {
  const int depth = 128;
  double f = u;
  for (int k = depth; k >= first + 1; --k) {
    f = u + static_cast<double>(k) / f;
  }
  return static_cast<double>(first) / f;
}

}  // namespace

double normal_pdf(double u) {
  return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_survival(double u) {
  if (u > kCfThreshold) {
    return std::exp(normal_log_survival(u));
  }
  return 0.5 * std::erfc(u * kInvSqrt2);
}

double normal_log_survival(double u) {
  if (u <= kCfThreshold) {
    return std::log(0.5 * std::erfc(u * kInvSqrt2));
  }
  // log phi(u) - log hazard(u)
  return -0.5 * u * u - kHalfLog2Pi - std::log(normal_hazard(u));
}

double normal_hazard(double u) {
  if (u <= kCfThreshold) {
    return normal_pdf(u) / (0.5 * std::erfc(u * kInvSqrt2));
  }
  return u + cf_tail(u, 1);  // hazard = u + 1/(u + 2/(u + 3/(u + ...)))
}

double normal_truncated_var_factor(double u) {
  if (u <= kCfThreshold) {
    const double lam = normal_hazard(u);
    return 1.0 + u * lam - lam * lam;
  }
  // With d = hazard - u = 1/(u + t) and t = 2/(u + 3/(u + ...)):
  //   1 + u*hazard - hazard^2 = 1 - u*d - d^2 = t/(u + t) - d^2.
  const double t = cf_tail(u, 2);
  const double d = 1.0 / (u + t);
  return t / (u + t) - d * d;
}

}  // namespace goodhart
