/* goodhart.h — C API for the Goodhart over-optimization toolkit.
 *
 * The library studies what happens to a latent goal G when a proxy metric
 * M = G + xi is optimized, modeled as conditioning on M > m for growing m.
 * Two coupled models are provided (bivariate Gaussian; exponential goal with
 * a conditionally heavy-tailed discrepancy), together with exact/quadrature
 * oracles for the conditional moments, closed-form asymptotic expansions,
 * Monte Carlo estimators (rejection and importance sampling), an exact
 * series engine that regenerates the expansion coefficients, and a regime
 * classifier (No/Benign/Weak/Strong Goodhart).
 *
 * All functions return gh_status; results go through out-parameters.
 * Handles are opaque and must be released with the matching _destroy call.
 * gh_last_error_message() gives a thread-local detail string for the most
 * recent failure on the calling thread.
 */
#ifndef GOODHART_H
#define GOODHART_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GOODHART_API __declspec(dllexport)
#else
#define GOODHART_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gh_status {
  GH_OK = 0,
  GH_ERR_INVALID_ARGUMENT = 1,
  GH_ERR_NONPOSITIVE_VARIANCE = 2,
  GH_ERR_DEGENERATE_COVARIANCE = 3,
  GH_ERR_SHAPE_TOO_SMALL = 4,
  GH_ERR_INSUFFICIENT_ACCEPTANCE = 5,
  GH_ERR_DEGENERATE_WEIGHTS = 6,
  GH_ERR_QUADRATURE_NONCONVERGENCE = 7,
  GH_ERR_POLE_AT_ZERO = 8,
  GH_ERR_INSUFFICIENT_TRAJECTORY = 9,
  GH_ERR_SCHEMA_MISMATCH = 10,
  GH_ERR_UNSUPPORTED = 11,
  GH_ERR_INTERNAL = 12
} gh_status;

GOODHART_API const char* gh_status_name(gh_status status);
GOODHART_API const char* gh_last_error_message(void);
GOODHART_API const char* gh_version(void);

/* ---------------------------------------------------------------- models */

typedef struct gh_model gh_model;

enum { GH_MODEL_GAUSSIAN = 0, GH_MODEL_EXPHEAVY = 1 };

/* Centered bivariate normal (G, xi) with Var G = var_g, Var xi = var_xi,
 * Cov(G, xi) = cov.  Requires var_g > 0, var_xi > 0, cov^2 < var_g*var_xi. */
GOODHART_API gh_status gh_model_create_gaussian(double var_g, double var_xi,
                                                double cov, gh_model** out);

/* G ~ Exp(1); xi | G has survival exp(-G((x/scale)^(shape-1) - 1)) on
 * x >= scale.  Requires shape > 1, scale > 0. */
GOODHART_API gh_status gh_model_create_expheavy(double shape, double scale,
                                                gh_model** out);

GOODHART_API void gh_model_destroy(gh_model* model);

GOODHART_API int gh_model_kind(const gh_model* model);

/* Gaussian only: 1 when Var G <= Var xi (advisory; the benign-regime result
 * assumes Var G > Var xi). */
GOODHART_API int gh_model_variance_warning(const gh_model* model);

GOODHART_API gh_status gh_model_joint_density(const gh_model* model, double g,
                                              double x, double* out);

/* Heavy-tail marginal survival P(xi > x) = min(1, (scale/x)^(shape-1)). */
GOODHART_API gh_status gh_model_marginal_tail_xi(const gh_model* model,
                                                 double x, double* out);

/* ------------------------------------------------------------- sampling */

typedef struct gh_sampler gh_sampler;

GOODHART_API gh_status gh_sampler_create(const gh_model* model, uint64_t seed,
                                         gh_sampler** out);
GOODHART_API void gh_sampler_destroy(gh_sampler* sampler);

/* Fills g[i], xi[i] and (when non-NULL) m[i] = g[i] + xi[i] for i < n. */
GOODHART_API gh_status gh_sampler_draw(gh_sampler* sampler, size_t n,
                                       double* g, double* xi, double* m);

/* ------------------------------------------- conditional moment results */

/* Bit set in `valid` for every populated field; _err slots carry an
 * absolute error bound (oracle), the first-omitted-term magnitude
 * (asymptotics), or a standard error (Monte Carlo). */
enum {
  GH_FIELD_TAIL_PROB = 1u << 0,
  GH_FIELD_MEAN_G = 1u << 1,
  GH_FIELD_MEAN_XI = 1u << 2,
  GH_FIELD_SECOND_G = 1u << 3,
  GH_FIELD_CROSS = 1u << 4,
  GH_FIELD_VAR_G = 1u << 5,
  GH_FIELD_VAR_XI = 1u << 6,
  GH_FIELD_COV_GM = 1u << 7,
  GH_FIELD_CORR_GM = 1u << 8
};

typedef struct gh_moments {
  double tail_prob, mean_g, mean_xi, second_g, cross, var_g, var_xi, cov_gm,
      corr_gm;
  double tail_prob_err, mean_g_err, mean_xi_err, second_g_err, cross_err,
      var_g_err, var_xi_err, cov_gm_err, corr_gm_err;
  /* log P(M > m); stays finite when tail_prob underflows to 0. */
  double log_tail_prob;
  unsigned valid;
} gh_moments;

/* Deterministic ground truth: exact truncated-normal identities (Gaussian;
 * tol ignored) or adaptive quadrature of the reduced 1-D integrals
 * (heavy tail; tol in (0, 1e-4], relative). */
GOODHART_API gh_status gh_oracle_moments(const gh_model* model, double m,
                                         double tol, gh_moments* out);

/* Closed-form asymptotic expansions.  Gaussian: order ignored (printed
 * orders).  Heavy tail: order in 1..4; mean_xi requires shape > 2. */
GOODHART_API gh_status gh_asymptotic_moments(const gh_model* model, double m,
                                             int order, gh_moments* out);

/* Partial sum of the Gaussian tail series for int_x^inf exp(-u^2) du.
 * Sets *divergence_warning when the first omitted term already exceeds the
 * last included one. */
GOODHART_API gh_status gh_gaussian_tail_series(double x, int n_terms,
                                               double* value,
                                               int* divergence_warning);

/* (a+c)*sqrt(a+b+2c)/sqrt(ab-c^2): the m-independent coefficient of the
 * 1/m correlation decay. */
GOODHART_API gh_status gh_gaussian_corr_coefficient(double var_g, double var_xi,
                                                    double cov, double* out);

/* High-precision standard normal survival P(Z > u). */
GOODHART_API gh_status gh_normal_survival(double u, double* out);

/* ---------------------------------------------------------- Monte Carlo */

typedef enum gh_statistic {
  GH_STAT_GOAL_MEAN = 0,
  GH_STAT_NOISE_MEAN = 1,
  GH_STAT_GOAL_SECOND_MOMENT = 2,
  GH_STAT_CROSS_MOMENT = 3,
  GH_STAT_GOAL_VARIANCE = 4,
  GH_STAT_CORRELATION = 5,
  GH_STAT_TAIL_PROB = 6
} gh_statistic;

typedef enum gh_mc_method {
  GH_MC_REJECTION = 0,
  GH_MC_IMPORTANCE_SHIFT = 1,
  GH_MC_IMPORTANCE_TAIL = 2
} gh_mc_method;

typedef struct gh_estimate {
  double value;
  double std_error;
  /* Accepted count (rejection) or effective sample size (importance). */
  double n_accepted;
  uint64_t budget_used;
  int method; /* gh_mc_method */
} gh_estimate;

GOODHART_API gh_status gh_estimate_rejection(const gh_model* model, double m,
                                             gh_statistic stat, uint64_t budget,
                                             uint64_t seed, gh_estimate* out);

/* Dispatches to the tilted-proposal (Gaussian) or truncated-tail
 * (heavy-tail) importance sampler. */
GOODHART_API gh_status gh_estimate_importance(const gh_model* model, double m,
                                              gh_statistic stat,
                                              uint64_t budget, uint64_t seed,
                                              gh_estimate* out);

/* One sampling pass, all conditional quantities of the sweep schema.
 * method: gh_mc_method chosen automatically if < 0. */
GOODHART_API gh_status gh_estimate_sweep_row(const gh_model* model, double m,
                                             uint64_t budget, uint64_t seed,
                                             int method, gh_moments* out);

/* -------------------------------------------------------- series engine */

/* Regenerates the boundary-series coefficient tables from the iterated
 * integration-by-parts operator and compares them with the transcribed
 * reference tables.  Returns a JSON report (free with gh_string_free);
 * n_pass/n_fail/n_expected_mismatch may be NULL. */
GOODHART_API gh_status gh_series_verify(char** json_out, int* n_pass,
                                        int* n_fail, int* n_expected_mismatch);

/* ------------------------------------------------------------ selfcheck */

/* Runs the invariant suite for scope "gaussian", "expheavy", "series" or
 * "all"; JSON report with per-check PASS/FAIL. */
GOODHART_API gh_status gh_selfcheck(const char* scope, char** json_out,
                                    int* n_pass, int* n_fail);

GOODHART_API void gh_string_free(char* str);

/* --------------------------------------------------- regime classifier */

typedef struct gh_trajectory_point {
  double m;
  double mean_g, mean_g_err;
  double corr_gm, corr_gm_err; /* read only when has_corr != 0 */
  int has_corr;
} gh_trajectory_point;

typedef enum gh_regime {
  GH_REGIME_NO_GOODHART = 0,
  GH_REGIME_BENIGN = 1,
  GH_REGIME_WEAK = 2,
  GH_REGIME_STRONG = 3,
  GH_REGIME_INCONCLUSIVE = 4
} gh_regime;

GOODHART_API const char* gh_regime_name(gh_regime regime);

/* Classifies a trajectory of conditional summaries against the four
 * Goodhart outcomes.  support_inf/support_sup bound the goal's support
 * (use -INFINITY/INFINITY when unbounded).  Needs >= 6 points with
 * strictly increasing m spanning a factor >= 8.  diagnostics_json (may be
 * NULL) receives the fitted trend statistics. */
GOODHART_API gh_status gh_classify(const gh_trajectory_point* points,
                                   size_t n, double support_inf,
                                   double support_sup, gh_regime* out,
                                   char** diagnostics_json);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* GOODHART_H */
