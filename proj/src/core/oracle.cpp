#include "core/oracle.hpp"

#include <cmath>

#include "core/errors.hpp"
#include "core/normal.hpp"
#include "core/quadrature.hpp"

namespace goodhart {

namespace {

constexpr double kSurvivalRelErr = 1e-12;

void set_field(ConditionalMoments& out, unsigned bit, double& slot,
               double& err_slot, double value, double err) {
  slot = value;
  err_slot = err;
  out.valid |= bit;
}

}  // namespace

ConditionalMoments gaussian_conditional_moments_exact(const CovarianceSpec& spec,
                                                      double m) {
  const double s = spec.s();
  const double root_s = std::sqrt(s);
  const double beta = spec.beta();
  const double var_eps = spec.residual_var();
  const double u = m / root_s;

  const double lam = normal_hazard(u);
  const double em = root_s * lam;                       // E[M | M>m]
  const double em2 = s * (1.0 + u * lam);               // E[M^2 | M>m]
  const double var_m = s * normal_truncated_var_factor(u);

  ConditionalMoments out;
  out.log_tail_prob = normal_log_survival(u);
  const double tail = normal_survival(u);
  const double mean_g = beta * em;
  const double mean_xi = (1.0 - beta) * em;
  const double second_g = beta * beta * em2 + var_eps;
  const double cross = beta * (1.0 - beta) * em2 - var_eps;
  const double var_g = beta * beta * var_m + var_eps;
  const double var_xi = (1.0 - beta) * (1.0 - beta) * var_m + var_eps;
  const double cov_gm = beta * var_m;
  const double corr_gm = cov_gm / std::sqrt(var_g * var_m);

  set_field(out, kFieldTailProb, out.tail_prob, out.tail_prob_err, tail,
            kSurvivalRelErr * tail);
  set_field(out, kFieldMeanG, out.mean_g, out.mean_g_err, mean_g,
            kSurvivalRelErr * std::fabs(mean_g));
  set_field(out, kFieldMeanXi, out.mean_xi, out.mean_xi_err, mean_xi,
            kSurvivalRelErr * std::fabs(mean_xi));
  // Second-order fields inherit rounding of O(m^2)-sized intermediates.
  const double second_scale = std::fabs(em2) + em * em;
  set_field(out, kFieldSecondG, out.second_g, out.second_g_err, second_g,
            kSurvivalRelErr * (std::fabs(second_g) + second_scale));
  set_field(out, kFieldCross, out.cross, out.cross_err, cross,
            kSurvivalRelErr * (std::fabs(cross) + second_scale));
  set_field(out, kFieldVarG, out.var_g, out.var_g_err, var_g,
            kSurvivalRelErr * (std::fabs(var_g) + second_scale));
  set_field(out, kFieldVarXi, out.var_xi, out.var_xi_err, var_xi,
            kSurvivalRelErr * (std::fabs(var_xi) + second_scale));
  set_field(out, kFieldCovGm, out.cov_gm, out.cov_gm_err, cov_gm,
            kSurvivalRelErr * (std::fabs(cov_gm) + second_scale));
  set_field(out, kFieldCorrGm, out.corr_gm, out.corr_gm_err, corr_gm,
            1e-11 * std::fabs(corr_gm) + 1e-15);
  return out;
}

std::vector<double> expheavy_integration_breakpoints(const HeavyTailSpec& spec,
                                                     double m) {
  const double hi = m - spec.scale;
  // exp(-g((m-g)/eta)^(b-1)) falls on the scale g0 = (eta/m)^(b-1); seed
  // doubling intervals from there so the panel splitter sees the spike.
  const double g0 = std::pow(spec.scale / m, spec.shape - 1.0);
  double start = std::min(g0, 0.25 * hi);
  if (!(start > 0.0)) start = hi * 0x1p-60;
  std::vector<double> pts{0.0};
  for (double t = start; t < hi; t *= 2.0) {
    pts.push_back(t);
  }
  pts.push_back(hi);
  return pts;
}

ConditionalMoments expheavy_conditional_moments_quad(const HeavyTailSpec& spec,
                                                     double m, double tol) {
  if (!(m > spec.scale)) {
    fail(ErrorCode::InvalidArgument,
         "conditional moments need m > scale (support of M)");
  }
  if (!(tol > 0.0) || tol > 1e-4) {
    fail(ErrorCode::InvalidArgument, "tol must lie in (0, 1e-4]");
  }
  const double eta = spec.scale;
  const double b = spec.shape;
  const double bm1 = b - 1.0;
  const auto pts = expheavy_integration_breakpoints(spec, m);
  QuadOptions opts;
  opts.rel_tol = tol;

  const auto decay = [&](double g) {
    return std::exp(-g * std::pow((m - g) / eta, bm1));
  };
  const QuadResult tail_q = integrate_segmented(decay, pts, opts);
  const QuadResult goal_q = integrate_segmented(
      [&](double g) { return g * decay(g); }, pts, opts);

  const double remainder = std::exp(-(m - eta));  // survival of G past m-eta
  const double tail = tail_q.value + remainder;
  const double goal_num = goal_q.value + remainder * (m - eta + 1.0);

  ConditionalMoments out;
  out.log_tail_prob = std::log(tail);
  set_field(out, kFieldTailProb, out.tail_prob, out.tail_prob_err, tail,
            tail_q.error_bound);
  const double mean_g = goal_num / tail;
  set_field(out, kFieldMeanG, out.mean_g, out.mean_g_err, mean_g,
            (goal_q.error_bound + mean_g * tail_q.error_bound) / tail);

  if (b > 2.0) {
    const QuadResult pareto_q = integrate_segmented(
        [&](double g) { return std::pow(eta / (m - g), bm1) * decay(g); }, pts,
        opts);
    const double noise_num = bm1 * (goal_q.value + pareto_q.value) +
                             bm1 * std::pow(eta, bm1) /
                                 ((b - 2.0) * std::pow(m, b - 2.0));
    const double mean_xi = noise_num / tail;
    const double noise_err = bm1 * (goal_q.error_bound + pareto_q.error_bound);
    set_field(out, kFieldMeanXi, out.mean_xi, out.mean_xi_err, mean_xi,
              (noise_err + mean_xi * tail_q.error_bound) / tail);
  }
  return out;
}

ConditionalMoments oracle_moments(const ModelSpec& model, double m, double tol) {
  if (const auto* gs = std::get_if<CovarianceSpec>(&model)) {
    return gaussian_conditional_moments_exact(*gs, m);
  }
  return expheavy_conditional_moments_quad(std::get<HeavyTailSpec>(model), m,
                                           tol);
}

}  // namespace goodhart
