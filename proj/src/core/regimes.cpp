#include "core/regimes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "core/errors.hpp"

namespace goodhart {

namespace {

struct LineFit {
  double slope = 0.0;
  double r2 = 1.0;
};

LineFit fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += std::log(xs[i]);
    sy += std::log(ys[i]);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(xs[i]) - mx;
    const double dy = std::log(ys[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

const char* bool_str(bool b) { return b ? "true" : "false"; }

}  // namespace

const char* regime_label_name(RegimeLabel label) {
  switch (label) {
    case RegimeLabel::NoGoodhart: return "NoGoodhart";
    case RegimeLabel::Benign: return "Benign";
    case RegimeLabel::Weak: return "Weak";
    case RegimeLabel::Strong: return "Strong";
    case RegimeLabel::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

RegimeResult classify(const std::vector<TrajectoryPoint>& trajectory,
                      double support_inf, double support_sup,
                      const ClassifyOptions& opt) {
  if (trajectory.size() < 6) {
    fail(ErrorCode::InsufficientTrajectory, "need at least 6 trajectory points");
  }
  for (std::size_t i = 0; i + 1 < trajectory.size(); ++i) {
    if (!(trajectory[i].m < trajectory[i + 1].m)) {
      fail(ErrorCode::InsufficientTrajectory, "m must be strictly increasing");
    }
  }
  if (!(trajectory.front().m > 0.0)) {
    fail(ErrorCode::InsufficientTrajectory,
         "log-log trend tests need positive thresholds");
  }
  if (!(trajectory.back().m >= 8.0 * trajectory.front().m)) {
    fail(ErrorCode::InsufficientTrajectory,
         "thresholds must span at least a factor of 8");
  }

  RegimeResult res;
  RegimeDiagnostics& d = res.diag;
  d.n_points = static_cast<int>(trajectory.size());
  d.m_span_factor = trajectory.back().m / trajectory.front().m;

  std::vector<double> ms, means, mean_errs;
  for (const auto& pt : trajectory) {
    ms.push_back(pt.m);
    means.push_back(pt.mean_g);
    mean_errs.push_back(pt.mean_g_err);
  }
  d.mean_last = means.back();

  // ---- mean trend --------------------------------------------------------
  const double mean_scale = std::max(std::fabs(median(means)), 1e-300);
  d.mean_reliable = median(mean_errs) <= opt.noise_gate * mean_scale;
  d.mean_increasing = true;
  d.mean_decreasing = true;
  for (std::size_t i = 0; i + 1 < means.size(); ++i) {
    d.mean_increasing = d.mean_increasing && means[i] < means[i + 1];
    d.mean_decreasing = d.mean_decreasing && means[i] > means[i + 1];
  }
  const bool means_positive =
      std::all_of(means.begin(), means.end(), [](double v) { return v > 0.0; });
  bool mean_flat = false;
  if (means_positive) {
    const LineFit fit = fit_loglog(ms, means);
    d.mean_slope = fit.slope;
    mean_flat = std::fabs(fit.slope) < opt.flat_band;
  } else {
    d.mean_slope = std::numeric_limits<double>::quiet_NaN();
  }

  const bool sup_infinite = std::isinf(support_sup) && support_sup > 0.0;
  d.mean_to_sup = sup_infinite && means_positive && d.mean_increasing &&
                  d.mean_slope >= opt.grow_slope;
  // "-> inf" surrogate: decreasing toward a finite lower support edge.
  if (std::isfinite(support_inf)) {
    std::vector<double> gaps;
    bool gaps_positive = true;
    for (double v : means) {
      gaps.push_back(v - support_inf);
      gaps_positive = gaps_positive && v - support_inf > 0.0;
    }
    if (gaps_positive && d.mean_decreasing) {
      d.mean_to_inf = fit_loglog(ms, gaps).slope <= -opt.grow_slope;
    }
  }

  // Plateau: flat fit, small relative spread, and strictly below the top of
  // the support (with error-bound headroom when the top is finite).
  const auto [min_it, max_it] = std::minmax_element(means.begin(), means.end());
  const bool small_spread = *max_it - *min_it <= opt.plateau_band * mean_scale;
  bool below_sup = true;
  if (!sup_infinite) {
    below_sup = means.back() + 2.0 * mean_errs.back() < support_sup;
  }
  const bool flat_enough = means_positive ? mean_flat : true;
  d.plateau_below_sup = flat_enough && small_spread && below_sup;

  // ---- correlation trend --------------------------------------------------
  d.corr_available = std::all_of(trajectory.begin(), trajectory.end(),
                                 [](const auto& p) { return p.corr_gm.has_value(); });
  if (d.corr_available) {
    std::vector<double> corrs, corr_errs;
    for (const auto& pt : trajectory) {
      corrs.push_back(*pt.corr_gm);
      corr_errs.push_back(pt.corr_gm_err);
    }
    d.corr_last = corrs.back();
    const double corr_scale = std::max(std::fabs(median(corrs)), 1e-300);
    d.corr_reliable = median(corr_errs) <= opt.noise_gate * corr_scale;
    const bool corr_positive =
        std::all_of(corrs.begin(), corrs.end(), [](double v) { return v > 0.0; });
    if (!corr_positive) {
      // The reference models never produce it; no semantics invented.
      d.note += "nonpositive correlation observed; ";
    } else if (d.corr_reliable) {
      const LineFit fit = fit_loglog(ms, corrs);
      d.corr_slope = fit.slope;
      d.corr_r2 = fit.r2;
      d.corr_decays = fit.slope <= opt.decay_slope && fit.r2 >= opt.r2_min;
      const double corr_min = *std::min_element(corrs.begin(), corrs.end());
      d.corr_stays_informative =
          std::fabs(fit.slope) < opt.flat_band && corr_min >= opt.corr_floor;
    }
  }

  // ---- combine ------------------------------------------------------------
  if (d.mean_reliable && d.mean_to_inf) {
    res.label = RegimeLabel::Strong;
  } else if (d.mean_reliable && d.mean_to_sup) {
    if (!d.corr_available || !d.corr_reliable) {
      res.label = RegimeLabel::Inconclusive;
      d.note += "goal diverges but correlation trend unavailable; ";
    } else if (d.corr_stays_informative) {
      res.label = RegimeLabel::NoGoodhart;
    } else if (d.corr_decays) {
      res.label = RegimeLabel::Benign;
    } else {
      res.label = RegimeLabel::Inconclusive;
      d.note += "correlation trend neither flat nor clean 1/m-type decay; ";
    }
  } else if (d.mean_reliable && d.plateau_below_sup) {
    res.label = RegimeLabel::Weak;
  } else {
    res.label = RegimeLabel::Inconclusive;
    if (!d.mean_reliable) d.note += "goal trend too noisy; ";
  }
  return res;
}

std::string RegimeDiagnostics::to_json(RegimeLabel label) const {
  std::ostringstream os;
  os.precision(17);
  os << "{\"label\":\"" << regime_label_name(label) << "\""
     << ",\"n_points\":" << n_points << ",\"m_span_factor\":" << m_span_factor
     << ",\"mean\":{\"slope\":" << mean_slope << ",\"last\":" << mean_last
     << ",\"increasing\":" << bool_str(mean_increasing)
     << ",\"decreasing\":" << bool_str(mean_decreasing)
     << ",\"reliable\":" << bool_str(mean_reliable)
     << ",\"to_sup\":" << bool_str(mean_to_sup)
     << ",\"to_inf\":" << bool_str(mean_to_inf)
     << ",\"plateau_below_sup\":" << bool_str(plateau_below_sup) << "}"
     << ",\"corr\":{\"available\":" << bool_str(corr_available)
     << ",\"reliable\":" << bool_str(corr_reliable)
     << ",\"slope\":" << corr_slope << ",\"r2\":" << corr_r2
     << ",\"last\":" << corr_last << ",\"decays\":" << bool_str(corr_decays)
     << ",\"stays_informative\":" << bool_str(corr_stays_informative) << "}";
  if (!note.empty()) {
    std::string escaped;
    for (char c : note) {
      if (c == '"' || c == '\\') escaped.push_back('\\');
      escaped.push_back(c);
    }
    os << ",\"note\":\"" << escaped << "\"";
  }
  os << "}";
  return os.str();
}

}  // namespace goodhart
