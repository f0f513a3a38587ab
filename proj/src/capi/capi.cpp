// C API shim: maps the C++ core onto opaque handles and status codes.
// Exceptions never cross the boundary; the message of the most recent
// failure is kept per thread for gh_last_error_message().

#include "goodhart/goodhart.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "core/asymptotics.hpp"
#include "core/errors.hpp"
#include "core/mc.hpp"
#include "core/model.hpp"
#include "core/normal.hpp"
#include "core/oracle.hpp"
#include "core/regimes.hpp"
#include "core/selfcheck.hpp"
#include "core/series.hpp"

using goodhart::ConditionalMoments;
using goodhart::ModelSpec;

struct gh_model {
  ModelSpec spec;
};

struct gh_sampler {
  ModelSpec spec;
  goodhart::RandomStream stream;
};

namespace {

thread_local std::string t_last_error;

gh_status status_from(goodhart::ErrorCode code) {
  using goodhart::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument: return GH_ERR_INVALID_ARGUMENT;
    case ErrorCode::NonPositiveVariance: return GH_ERR_NONPOSITIVE_VARIANCE;
    case ErrorCode::DegenerateCovariance: return GH_ERR_DEGENERATE_COVARIANCE;
    case ErrorCode::ShapeTooSmall: return GH_ERR_SHAPE_TOO_SMALL;
    case ErrorCode::InsufficientAcceptance: return GH_ERR_INSUFFICIENT_ACCEPTANCE;
    case ErrorCode::DegenerateWeights: return GH_ERR_DEGENERATE_WEIGHTS;
    case ErrorCode::QuadratureNonConvergence:
      return GH_ERR_QUADRATURE_NONCONVERGENCE;
    case ErrorCode::PoleAtZero: return GH_ERR_POLE_AT_ZERO;
    case ErrorCode::InsufficientTrajectory: return GH_ERR_INSUFFICIENT_TRAJECTORY;
    case ErrorCode::SchemaMismatch: return GH_ERR_SCHEMA_MISMATCH;
    case ErrorCode::Unsupported: return GH_ERR_UNSUPPORTED;
    case ErrorCode::Internal: return GH_ERR_INTERNAL;
  }
  return GH_ERR_INTERNAL;
}

template <typename Fn>
gh_status guarded(Fn&& fn) {
  try {
    fn();
    t_last_error.clear();
    return GH_OK;
  } catch (const goodhart::Error& e) {
    t_last_error = e.what();
    return status_from(e.code());
  } catch (const std::bad_alloc&) {
    t_last_error = "out of memory";
    return GH_ERR_INTERNAL;
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return GH_ERR_INTERNAL;
  }
}

gh_status require(bool ok, const char* message) {
  if (ok) return GH_OK;
  t_last_error = message;
  return GH_ERR_INVALID_ARGUMENT;
}

void fill_moments(const ConditionalMoments& in, gh_moments* out) {
  out->tail_prob = in.tail_prob;
  out->mean_g = in.mean_g;
  out->mean_xi = in.mean_xi;
  out->second_g = in.second_g;
  out->cross = in.cross;
  out->var_g = in.var_g;
  out->var_xi = in.var_xi;
  out->cov_gm = in.cov_gm;
  out->corr_gm = in.corr_gm;
  out->tail_prob_err = in.tail_prob_err;
  out->mean_g_err = in.mean_g_err;
  out->mean_xi_err = in.mean_xi_err;
  out->second_g_err = in.second_g_err;
  out->cross_err = in.cross_err;
  out->var_g_err = in.var_g_err;
  out->var_xi_err = in.var_xi_err;
  out->cov_gm_err = in.cov_gm_err;
  out->corr_gm_err = in.corr_gm_err;
  out->log_tail_prob = in.log_tail_prob;
  out->valid = in.valid;
}

void fill_moments(const goodhart::AsymptoticMoments& in, gh_moments* out) {
  *out = gh_moments{};
  out->tail_prob = in.tail_prob;
  out->mean_g = in.mean_g;
  out->mean_xi = in.mean_xi;
  out->second_g = in.second_g;
  out->cross = in.cross;
  out->var_g = in.var_g;
  out->var_xi = in.var_xi;
  out->cov_gm = in.cov_gm;
  out->corr_gm = in.corr_gm;
  out->tail_prob_err = in.tail_prob_next;
  out->mean_g_err = in.mean_g_next;
  out->mean_xi_err = in.mean_xi_next;
  out->second_g_err = in.second_g_next;
  out->cross_err = in.cross_next;
  out->var_g_err = in.var_g_next;
  out->var_xi_err = in.var_xi_next;
  out->cov_gm_err = in.cov_gm_next;
  out->corr_gm_err = in.corr_gm_next;
  out->log_tail_prob = in.log_tail_prob;
  out->valid = in.valid;
}

void fill_estimate(const goodhart::ConditionalEstimate& in, gh_estimate* out) {
  out->value = in.value;
  out->std_error = in.std_error;
  out->n_accepted = in.n_accepted;
  out->budget_used = in.budget_used;
  out->method = static_cast<int>(in.method);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* gh_status_name(gh_status status) {
  switch (status) {
    case GH_OK: return "OK";
    case GH_ERR_INVALID_ARGUMENT: return "INVALID_ARGUMENT";
    case GH_ERR_NONPOSITIVE_VARIANCE: return "NONPOSITIVE_VARIANCE";
    case GH_ERR_DEGENERATE_COVARIANCE: return "DEGENERATE_COVARIANCE";
    case GH_ERR_SHAPE_TOO_SMALL: return "SHAPE_TOO_SMALL";
    case GH_ERR_INSUFFICIENT_ACCEPTANCE: return "INSUFFICIENT_ACCEPTANCE";
    case GH_ERR_DEGENERATE_WEIGHTS: return "DEGENERATE_WEIGHTS";
    case GH_ERR_QUADRATURE_NONCONVERGENCE: return "QUADRATURE_NONCONVERGENCE";
    case GH_ERR_POLE_AT_ZERO: return "POLE_AT_ZERO";
    case GH_ERR_INSUFFICIENT_TRAJECTORY: return "INSUFFICIENT_TRAJECTORY";
    case GH_ERR_SCHEMA_MISMATCH: return "SCHEMA_MISMATCH";
    case GH_ERR_UNSUPPORTED: return "UNSUPPORTED";
    case GH_ERR_INTERNAL: return "INTERNAL";
  }
  return "UNKNOWN";
}

const char* gh_last_error_message(void) { return t_last_error.c_str(); }

const char* gh_version(void) { return "0.1.0"; }

gh_status gh_model_create_gaussian(double var_g, double var_xi, double cov,
                                   gh_model** out) {
  if (gh_status s = require(out != nullptr, "out is NULL")) return s;
  return guarded([&] {
    *out = new gh_model{ModelSpec{
        goodhart::validate_gaussian_spec(var_g, var_xi, cov)}};
  });
}

gh_status gh_model_create_expheavy(double shape, double scale, gh_model** out) {
  if (gh_status s = require(out != nullptr, "out is NULL")) return s;
  return guarded([&] {
    *out = new gh_model{ModelSpec{
        goodhart::validate_expheavy_spec(shape, scale)}};
  });
}

void gh_model_destroy(gh_model* model) { delete model; }

int gh_model_kind(const gh_model* model) {
  return std::holds_alternative<goodhart::CovarianceSpec>(model->spec)
             ? GH_MODEL_GAUSSIAN
             : GH_MODEL_EXPHEAVY;
}

int gh_model_variance_warning(const gh_model* model) {
  if (const auto* gs = std::get_if<goodhart::CovarianceSpec>(&model->spec)) {
    return gs->variance_warning ? 1 : 0;
  }
  return 0;
}

gh_status gh_model_joint_density(const gh_model* model, double g, double x,
                                 double* out) {
  if (gh_status s = require(model != nullptr && out != nullptr, "NULL argument"))
    return s;
  return guarded([&] { *out = goodhart::joint_density(model->spec, g, x); });
}

gh_status gh_model_marginal_tail_xi(const gh_model* model, double x,
                                    double* out) {
  if (gh_status s = require(model != nullptr && out != nullptr, "NULL argument"))
    return s;
  return guarded([&] {
    const auto* hs = std::get_if<goodhart::HeavyTailSpec>(&model->spec);
    if (hs == nullptr) {
      goodhart::fail(goodhart::ErrorCode::Unsupported,
                     "marginal_tail_xi is a heavy-tail quantity");
    }
    *out = goodhart::marginal_tail_xi_expheavy(*hs, x);
  });
}

gh_status gh_sampler_create(const gh_model* model, uint64_t seed,
                            gh_sampler** out) {
  if (gh_status s = require(model != nullptr && out != nullptr, "NULL argument"))
    return s;
  return guarded([&] {
    *out = new gh_sampler{model->spec,
                          goodhart::RandomStream(seed, "sampler")};
  });
}

void gh_sampler_destroy(gh_sampler* sampler) { delete sampler; }

gh_status gh_sampler_draw(gh_sampler* sampler, size_t n, double* g, double* xi,
                          double* m) {
  if (gh_status s = require(sampler != nullptr && g != nullptr && xi != nullptr,
                            "NULL argument"))
    return s;
  return guarded([&] {
    for (size_t i = 0; i < n; ++i) {
      const goodhart::SamplePair pair =
          goodhart::sample_pair(sampler->spec, sampler->stream);
      g[i] = pair.g;
      xi[i] = pair.xi;
      if (m != nullptr) m[i] = pair.m_value;
    }
  });
}

gh_status gh_oracle_moments(const gh_model* model, double m, double tol,
                            gh_moments* out) {
  if (gh_status s = require(model != nullptr && out != nullptr, "NULL argument"))
    return s;
  return guarded([&] {
    *out = gh_moments{};
    fill_moments(goodhart::oracle_moments(model->spec, m, tol), out);
  });
}

gh_status gh_asymptotic_moments(const gh_model* model, double m, int order,
                                gh_moments* out) {
  if (gh_status s = require(model != nullptr && out != nullptr, "NULL argument"))
    return s;
  return guarded([&] {
    fill_moments(goodhart::asymptotic_moments(model->spec, m, order), out);
  });
}

gh_status gh_gaussian_tail_series(double x, int n_terms, double* value,
                                  int* divergence_warning) {
  if (gh_status s = require(value != nullptr, "value is NULL")) return s;
  return guarded([&] {
    bool warn = false;
    *value = goodhart::gaussian_tail_series(x, n_terms, &warn);
    if (divergence_warning != nullptr) *divergence_warning = warn ? 1 : 0;
  });
}

gh_status gh_gaussian_corr_coefficient(double var_g, double var_xi, double cov,
                                       double* out) {
  if (gh_status s = require(out != nullptr, "out is NULL")) return s;
  return guarded([&] {
    *out = goodhart::gaussian_corr_coefficient(
        goodhart::validate_gaussian_spec(var_g, var_xi, cov));
  });
}

gh_status gh_normal_survival(double u, double* out) {
  if (gh_status s = require(out != nullptr, "out is NULL")) return s;
  return guarded([&] { *out = goodhart::normal_survival(u); });
}

gh_status gh_estimate_rejection(const gh_model* model, double m,
                                gh_statistic stat, uint64_t budget,
                                uint64_t seed, gh_estimate* out) {
  if (gh_status s = require(model != nullptr && out != nullptr, "NULL argument"))
    return s;
  return guarded([&] {
    fill_estimate(goodhart::estimate_rejection(
                      model->spec, m, static_cast<goodhart::Statistic>(stat),
                      budget, seed),
                  out);
  });
}

gh_status gh_estimate_importance(const gh_model* model, double m,
                                 gh_statistic stat, uint64_t budget,
                                 uint64_t seed, gh_estimate* out) {
  if (gh_status s = require(model != nullptr && out != nullptr, "NULL argument"))
    return s;
  return guarded([&] {
    fill_estimate(goodhart::estimate_importance(
                      model->spec, m, static_cast<goodhart::Statistic>(stat),
                      budget, seed),
                  out);
  });
}

gh_status gh_estimate_sweep_row(const gh_model* model, double m,
                                uint64_t budget, uint64_t seed, int method,
                                gh_moments* out) {
  if (gh_status s = require(model != nullptr && out != nullptr, "NULL argument"))
    return s;
  return guarded([&] {
    const goodhart::McMethod chosen =
        method < 0 ? goodhart::default_mc_method(model->spec, m)
                   : static_cast<goodhart::McMethod>(method);
    *out = gh_moments{};
    fill_moments(goodhart::estimate_sweep_row(model->spec, m, budget, seed,
                                              chosen),
                 out);
  });
}

gh_status gh_series_verify(char** json_out, int* n_pass, int* n_fail,
                           int* n_expected_mismatch) {
  return guarded([&] {
    const goodhart::series::TableVerification report =
        goodhart::series::verify_reference_tables();
    if (json_out != nullptr) *json_out = dup_string(report.to_json());
    if (n_pass != nullptr) *n_pass = report.n_pass;
    if (n_fail != nullptr) *n_fail = report.n_fail;
    if (n_expected_mismatch != nullptr) {
      *n_expected_mismatch = report.n_expected_mismatch;
    }
  });
}

gh_status gh_selfcheck(const char* scope, char** json_out, int* n_pass,
                       int* n_fail) {
  if (gh_status s = require(scope != nullptr, "scope is NULL")) return s;
  return guarded([&] {
    const goodhart::CheckReport report = goodhart::run_selfcheck(scope);
    if (json_out != nullptr) *json_out = dup_string(report.to_json(scope));
    if (n_pass != nullptr) *n_pass = report.n_pass;
    if (n_fail != nullptr) *n_fail = report.n_fail;
  });
}

void gh_string_free(char* str) { std::free(str); }

const char* gh_regime_name(gh_regime regime) {
  return goodhart::regime_label_name(static_cast<goodhart::RegimeLabel>(regime));
}

gh_status gh_classify(const gh_trajectory_point* points, size_t n,
                      double support_inf, double support_sup, gh_regime* out,
                      char** diagnostics_json) {
  if (gh_status s = require(points != nullptr && out != nullptr, "NULL argument"))
    return s;
  return guarded([&] {
    std::vector<goodhart::TrajectoryPoint> traj(n);
    for (size_t i = 0; i < n; ++i) {
      traj[i].m = points[i].m;
      traj[i].mean_g = points[i].mean_g;
      traj[i].mean_g_err = points[i].mean_g_err;
      if (points[i].has_corr != 0) {
        traj[i].corr_gm = points[i].corr_gm;
        traj[i].corr_gm_err = points[i].corr_gm_err;
      }
    }
    const goodhart::RegimeResult res =
        goodhart::classify(traj, support_inf, support_sup);
    *out = static_cast<gh_regime>(res.label);
    if (diagnostics_json != nullptr) {
      *diagnostics_json = dup_string(res.diag.to_json(res.label));
    }
  });
}

}  // extern "C"
