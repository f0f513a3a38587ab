#include "core/mc.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>
#include <vector>

#include "core/errors.hpp"

namespace goodhart {

namespace {

constexpr std::uint64_t kShardSize = 1u << 16;
constexpr double kMinEffectiveSamples = 30.0;

// Weighted sums over the 5-moment vector v = (g, m, g^2, m^2, g*m).
// Enough for every statistic plus the delta-method covariance of the
// self-normalized ratios:
//   Cov(R_a, R_b) ~ sum w^2 (v_a - R_a)(v_b - R_b) / (sum w)^2.
struct MomentSums {
  double sw = 0.0, sw2 = 0.0;
  std::array<double, 5> swv{};
  std::array<double, 5> sw2v{};
  std::array<double, 25> sw2vv{};
  std::uint64_t n = 0;       // all proposals, weighted or not
  std::uint64_t n_pos = 0;   // proposals with positive weight

  void add(double w, double g, double mval) {
    ++n;
    if (w <= 0.0) return;
    ++n_pos;
    const std::array<double, 5> v{g, mval, g * g, mval * mval, g * mval};
    const double w2 = w * w;
    sw += w;
    sw2 += w2;
    for (int i = 0; i < 5; ++i) {
      swv[i] += w * v[i];
      sw2v[i] += w2 * v[i];
      for (int j = i; j < 5; ++j) sw2vv[i * 5 + j] += w2 * v[i] * v[j];
    }
  }

  void merge(const MomentSums& o) {
    sw += o.sw;
    sw2 += o.sw2;
    for (int i = 0; i < 5; ++i) {
      swv[i] += o.swv[i];
      sw2v[i] += o.sw2v[i];
    }
    for (int i = 0; i < 25; ++i) sw2vv[i] += o.sw2vv[i];
    n += o.n;
    n_pos += o.n_pos;
  }

  double ess() const { return sw2 > 0.0 ? sw * sw / sw2 : 0.0; }
};

int env_threads() {
  if (const char* env = std::getenv("GOODHART_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<int>(std::min<long>(v, 256));
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 8u));
}

// Runs fn(shard_index) over all shards and merges the per-shard sums in
// index order; identical output for any worker count.
template <typename Fn>
MomentSums sharded_accumulate(std::uint64_t budget, Fn&& fn) {
  const std::uint64_t n_shards = (budget + kShardSize - 1) / kShardSize;
  std::vector<MomentSums> partial(n_shards);
  const int threads =
      static_cast<int>(std::min<std::uint64_t>(goodhart_threads(), n_shards));
  if (threads <= 1) {
    for (std::uint64_t i = 0; i < n_shards; ++i) {
      const std::uint64_t count =
          std::min<std::uint64_t>(kShardSize, budget - i * kShardSize);
      partial[i] = fn(i, count);
    }
  } else {
    std::atomic<std::uint64_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::uint64_t i = next.fetch_add(1);
        if (i >= n_shards) return;
        const std::uint64_t count =
            std::min<std::uint64_t>(kShardSize, budget - i * kShardSize);
        partial[i] = fn(i, count);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  MomentSums total;
  for (const auto& p : partial) total.merge(p);
  return total;
}

struct ValueGrad {
  double value = 0.0;
  std::array<double, 5> grad{};
};

ValueGrad statistic_from_ratios(Statistic stat, const std::array<double, 5>& R) {
  ValueGrad out;
  switch (stat) {
    case Statistic::GoalMean:
      out.value = R[0];
      out.grad = {1, 0, 0, 0, 0};
      break;
    case Statistic::NoiseMean:  // E[xi] = E[M] - E[G]
      out.value = R[1] - R[0];
      out.grad = {-1, 1, 0, 0, 0};
      break;
    case Statistic::GoalSecondMoment:
      out.value = R[2];
      out.grad = {0, 0, 1, 0, 0};
      break;
    case Statistic::CrossMoment:  // E[G xi] = E[GM] - E[G^2]
      out.value = R[4] - R[2];
      out.grad = {0, 0, -1, 0, 1};
      break;
    case Statistic::GoalVariance:
      out.value = R[2] - R[0] * R[0];
      out.grad = {-2.0 * R[0], 0, 1, 0, 0};
      break;
    case Statistic::Correlation: {
      const double dg = R[2] - R[0] * R[0];
      const double dm = R[3] - R[1] * R[1];
      const double cgm = R[4] - R[0] * R[1];
      const double denom = std::sqrt(dg * dm);
      out.value = cgm / denom;
      // d r/dx = [dC - (C/2)(dDg/Dg + dDm/Dm)] / sqrt(Dg Dm)
      const auto drdx = [&](double dC, double dDg, double dDm) {
        return (dC - 0.5 * cgm * (dDg / dg + dDm / dm)) / denom;
      };
      out.grad = {drdx(-R[1], -2.0 * R[0], 0.0), drdx(-R[0], 0.0, -2.0 * R[1]),
                  drdx(0.0, 1.0, 0.0), drdx(0.0, 0.0, 1.0), drdx(1.0, 0.0, 0.0)};
      break;
    }
    case Statistic::TailProb:
      fail(ErrorCode::Internal, "tail probability has no ratio form");
  }
  return out;
}

// Delta-method value and standard error of a conditional (ratio) statistic.
ConditionalEstimate finalize_conditional(Statistic stat, const MomentSums& sums) {
  std::array<double, 5> R;
  for (int i = 0; i < 5; ++i) R[i] = sums.swv[i] / sums.sw;
  // Cov(R_a, R_b) via one-pass expansion of sum w^2 (v-R)(v-R).
  std::array<double, 25> cov;
  for (int i = 0; i < 5; ++i) {
    for (int j = i; j < 5; ++j) {
      const double centered = sums.sw2vv[i * 5 + j] - R[i] * sums.sw2v[j] -
                              R[j] * sums.sw2v[i] + R[i] * R[j] * sums.sw2;
      cov[i * 5 + j] = cov[j * 5 + i] = centered / (sums.sw * sums.sw);
    }
  }
  const ValueGrad vg = statistic_from_ratios(stat, R);
  double var = 0.0;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) var += vg.grad[i] * cov[i * 5 + j] * vg.grad[j];
  }
  ConditionalEstimate est;
  est.value = vg.value;
  est.std_error = std::sqrt(std::max(var, 0.0));
  return est;
}

MomentSums rejection_pass(const ModelSpec& model, double m,
                          std::uint64_t budget, std::uint64_t seed) {
  return sharded_accumulate(budget, [&](std::uint64_t shard, std::uint64_t count) {
    RandomStream rng(seed, "mc.rejection", shard);
    MomentSums sums;
    for (std::uint64_t i = 0; i < count; ++i) {
      const SamplePair pair = sample_pair(model, rng);
      sums.add(pair.m_value > m ? 1.0 : 0.0, pair.g, pair.m_value);
    }
    return sums;
  });
}

struct GaussianProposal {
  double s, root_s, beta, sigma_eps, mu_star;
};

GaussianProposal gaussian_proposal(const CovarianceSpec& spec, double m) {
  GaussianProposal p;
  p.s = spec.s();
  p.root_s = std::sqrt(p.s);
  p.beta = spec.beta();
  p.sigma_eps = std::sqrt(spec.residual_var());
  p.mu_star = m + p.s / m;  // matches the conditional location to first order
  return p;
}

MomentSums gaussian_importance_pass(const CovarianceSpec& spec, double m,
                                    std::uint64_t budget, std::uint64_t seed) {
  const GaussianProposal p = gaussian_proposal(spec, m);
  return sharded_accumulate(budget, [&](std::uint64_t shard, std::uint64_t count) {
    RandomStream rng(seed, "mc.is.gaussian", shard);
    MomentSums sums;
    for (std::uint64_t i = 0; i < count; ++i) {
      const double t = p.mu_star + p.root_s * rng.normal();
      if (!(t > m)) {
        sums.add(0.0, 0.0, 0.0);
        continue;
      }
      // Likelihood ratio against N(mu*, s), rescaled by its value at t = m
      // so weights stay in (0, 1]; the scale cancels in ratios and is
      // reapplied for tail probabilities.
      const double w = std::exp(-(t - m) * p.mu_star / p.s);
      const double g = p.beta * t + p.sigma_eps * rng.normal();
      sums.add(w, g, t);
    }
    return sums;
  });
}

// log of the weight scale dropped in gaussian_importance_pass.
double gaussian_weight_log_scale(const GaussianProposal& p, double m) {
  return p.mu_star * (p.mu_star - 2.0 * m) / (2.0 * p.s);
}

MomentSums expheavy_importance_pass(const HeavyTailSpec& spec, double m,
                                    std::uint64_t budget, std::uint64_t seed) {
  return sharded_accumulate(budget, [&](std::uint64_t shard, std::uint64_t count) {
    RandomStream rng(seed, "mc.is.expheavy", shard);
    MomentSums sums;
    for (std::uint64_t i = 0; i < count; ++i) {
      const double g = rng.exponential();
      const double lower = std::max(spec.scale, m - g);
      const double w = conditional_survival_xi(spec, g, lower);
      const double xi =
          xi_from_exponential_truncated(spec, g, lower, rng.exponential());
      sums.add(w, g, g + xi);
    }
    return sums;
  });
}

ConditionalEstimate weighted_tail_estimate(const MomentSums& sums,
                                           double log_scale) {
  const double n = static_cast<double>(sums.n);
  const double mean = sums.sw / n;
  // SE of the sample mean: sd(w)/sqrt(n).
  const double se2 = std::max(sums.sw2 / n - mean * mean, 0.0) / (n - 1.0);
  const double scale = std::exp(log_scale);
  ConditionalEstimate est;
  est.value = scale * mean;
  est.std_error = scale * std::sqrt(se2);
  return est;
}

void require_budget(std::uint64_t budget) {
  if (budget < 1000) {
    fail(ErrorCode::InvalidArgument, "budget must be at least 10^3");
  }
}

}  // namespace

int goodhart_threads() { return env_threads(); }

ConditionalEstimate estimate_rejection(const ModelSpec& model, double m,
                                       Statistic stat, std::uint64_t budget,
                                       std::uint64_t seed) {
  require_budget(budget);
  const MomentSums sums = rejection_pass(model, m, budget, seed);
  ConditionalEstimate est;
  est.method = McMethod::Rejection;
  est.budget_used = budget;
  est.n_accepted = static_cast<double>(sums.n_pos);
  if (stat == Statistic::TailProb) {
    const double p = static_cast<double>(sums.n_pos) / static_cast<double>(budget);
    est.value = p;
    est.std_error = std::sqrt(p * (1.0 - p) / static_cast<double>(budget));
    return est;
  }
  if (sums.n_pos < kMinEffectiveSamples) {
    fail(ErrorCode::InsufficientAcceptance,
         "fewer than 30 samples passed the threshold; use importance sampling");
  }
  const ConditionalEstimate cond = finalize_conditional(stat, sums);
  est.value = cond.value;
  est.std_error = cond.std_error;
  return est;
}

ConditionalEstimate estimate_importance_gaussian(const CovarianceSpec& spec,
                                                 double m, Statistic stat,
                                                 std::uint64_t budget,
                                                 std::uint64_t seed) {
  require_budget(budget);
  if (!(m > 0.0)) {
    fail(ErrorCode::InvalidArgument,
         "the tilted proposal needs m > 0; use rejection below that");
  }
  const MomentSums sums = gaussian_importance_pass(spec, m, budget, seed);
  ConditionalEstimate est;
  est.method = McMethod::ImportanceShift;
  est.budget_used = budget;
  est.n_accepted = sums.ess();
  if (stat == Statistic::TailProb) {
    const ConditionalEstimate tail = weighted_tail_estimate(
        sums, gaussian_weight_log_scale(gaussian_proposal(spec, m), m));
    est.value = tail.value;
    est.std_error = tail.std_error;
    return est;
  }
  if (sums.ess() < kMinEffectiveSamples) {
    fail(ErrorCode::DegenerateWeights,
         "effective sample size below 30; importance weights degenerate");
  }
  const ConditionalEstimate cond = finalize_conditional(stat, sums);
  est.value = cond.value;
  est.std_error = cond.std_error;
  return est;
}

ConditionalEstimate estimate_importance_expheavy(const HeavyTailSpec& spec,
                                                 double m, Statistic stat,
                                                 std::uint64_t budget,
                                                 std::uint64_t seed) {
  require_budget(budget);
  if (!(m > 2.0 * spec.scale)) {
    fail(ErrorCode::InvalidArgument,
         "the truncated-tail proposal needs m > 2*scale; use rejection");
  }
  if (stat == Statistic::NoiseMean && !(spec.shape > 2.0)) {
    fail(ErrorCode::ShapeTooSmall, "E[xi | M>m] diverges for shape <= 2");
  }
  const MomentSums sums = expheavy_importance_pass(spec, m, budget, seed);
  ConditionalEstimate est;
  est.method = McMethod::ImportanceTail;
  est.budget_used = budget;
  est.n_accepted = sums.ess();
  if (stat == Statistic::TailProb) {
    const ConditionalEstimate tail = weighted_tail_estimate(sums, 0.0);
    est.value = tail.value;
    est.std_error = tail.std_error;
    return est;
  }
  if (sums.ess() < kMinEffectiveSamples) {
    fail(ErrorCode::DegenerateWeights,
         "effective sample size below 30; importance weights degenerate");
  }
  const ConditionalEstimate cond = finalize_conditional(stat, sums);
  est.value = cond.value;
  est.std_error = cond.std_error;
  return est;
}

ConditionalEstimate estimate_importance(const ModelSpec& model, double m,
                                        Statistic stat, std::uint64_t budget,
                                        std::uint64_t seed) {
  if (const auto* gs = std::get_if<CovarianceSpec>(&model)) {
    return estimate_importance_gaussian(*gs, m, stat, budget, seed);
  }
  return estimate_importance_expheavy(std::get<HeavyTailSpec>(model), m, stat,
                                      budget, seed);
}

McMethod default_mc_method(const ModelSpec& model, double m) {
  if (const auto* gs = std::get_if<CovarianceSpec>(&model)) {
    return m / std::sqrt(gs->s()) >= 2.0 ? McMethod::ImportanceShift
                                         : McMethod::Rejection;
  }
  const auto& hs = std::get<HeavyTailSpec>(model);
  return m > std::max(2.0 * hs.scale, hs.scale + 2.0) ? McMethod::ImportanceTail
                                                      : McMethod::Rejection;
}

ConditionalMoments estimate_sweep_row(const ModelSpec& model, double m,
                                      std::uint64_t budget, std::uint64_t seed,
                                      McMethod method) {
  require_budget(budget);
  MomentSums sums;
  double tail_log_scale = 0.0;
  switch (method) {
    case McMethod::Rejection:
      sums = rejection_pass(model, m, budget, seed);
      break;
    case McMethod::ImportanceShift: {
      const auto& spec = std::get<CovarianceSpec>(model);
      if (!(m > 0.0)) fail(ErrorCode::InvalidArgument, "importance needs m > 0");
      sums = gaussian_importance_pass(spec, m, budget, seed);
      tail_log_scale = gaussian_weight_log_scale(gaussian_proposal(spec, m), m);
      break;
    }
    case McMethod::ImportanceTail: {
      const auto& spec = std::get<HeavyTailSpec>(model);
      if (!(m > 2.0 * spec.scale)) {
        fail(ErrorCode::InvalidArgument, "importance needs m > 2*scale");
      }
      sums = expheavy_importance_pass(spec, m, budget, seed);
      break;
    }
  }

  ConditionalMoments out;
  ConditionalEstimate tail;
  if (method == McMethod::Rejection) {
    const double p = static_cast<double>(sums.n_pos) / static_cast<double>(budget);
    tail.value = p;
    tail.std_error = std::sqrt(p * (1.0 - p) / static_cast<double>(budget));
  } else {
    tail = weighted_tail_estimate(sums, tail_log_scale);
  }
  out.tail_prob = tail.value;
  out.tail_prob_err = tail.std_error;
  out.log_tail_prob = std::log(tail.value);
  out.valid |= kFieldTailProb;

  const double effective = method == McMethod::Rejection
                               ? static_cast<double>(sums.n_pos)
                               : sums.ess();
  if (effective < kMinEffectiveSamples) {
    fail(method == McMethod::Rejection ? ErrorCode::InsufficientAcceptance
                                       : ErrorCode::DegenerateWeights,
         "conditioned sample set too small for conditional statistics");
  }

  const bool want_xi =
      !std::holds_alternative<HeavyTailSpec>(model) ||
      std::get<HeavyTailSpec>(model).shape > 2.0;
  const auto put = [&](Statistic stat, unsigned bit, double& slot,
                       double& err_slot) {
    const ConditionalEstimate e = finalize_conditional(stat, sums);
    slot = e.value;
    err_slot = e.std_error;
    out.valid |= bit;
  };
  put(Statistic::GoalMean, kFieldMeanG, out.mean_g, out.mean_g_err);
  if (want_xi) put(Statistic::NoiseMean, kFieldMeanXi, out.mean_xi, out.mean_xi_err);
  put(Statistic::GoalVariance, kFieldVarG, out.var_g, out.var_g_err);
  put(Statistic::Correlation, kFieldCorrGm, out.corr_gm, out.corr_gm_err);
  return out;
}

}  // namespace goodhart
