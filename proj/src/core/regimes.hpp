#pragma once

// Classification of an optimization trajectory into the four Goodhart
// outcomes.  The definitions are limits at the top of M's support; at
// finite m they are approximated by trend tests on the curve of
// (E[G | M>m], Corr(G, M | M>m)): log-log slope fits for decay/divergence,
// a plateau test for bounded stagnation.  Thresholds are configurable;
// the defaults classify both reference models with an order-of-magnitude
// margin.  When the tests conflict or the data are too noisy the answer
// is Inconclusive, never a guess.

#include <optional>
#include <string>
#include <vector>

namespace goodhart {

struct TrajectoryPoint {
  double m = 0.0;
  double mean_g = 0.0;
  double mean_g_err = 0.0;
  std::optional<double> corr_gm;
  double corr_gm_err = 0.0;
  std::string source;  // Oracle | MonteCarlo | Asymptotic (informational)
};

enum class RegimeLabel { NoGoodhart, Benign, Weak, Strong, Inconclusive };

const char* regime_label_name(RegimeLabel label);

struct ClassifyOptions {
  double decay_slope = -0.5;   // corr log-log slope at/below => "corr -> 0"
  double flat_band = 0.1;      // |slope| below => flat trend
  double r2_min = 0.9;         // fit quality gate for the corr decay test
  double grow_slope = 0.5;     // mean log-log slope at/above => "-> sup"
  double corr_floor = 0.05;    // "bounded away from zero"
  double plateau_band = 0.2;   // relative spread still counted as a plateau
  double noise_gate = 0.5;     // median err above gate*|median| => unusable
};

struct RegimeDiagnostics {
  int n_points = 0;
  double m_span_factor = 0.0;
  bool corr_available = false;
  bool corr_reliable = false;
  double corr_slope = 0.0, corr_r2 = 0.0, corr_last = 0.0;
  bool corr_decays = false, corr_stays_informative = false;
  bool mean_reliable = false;
  double mean_slope = 0.0, mean_last = 0.0;
  bool mean_increasing = false, mean_decreasing = false;
  bool mean_to_sup = false, mean_to_inf = false, plateau_below_sup = false;
  std::string note;
  std::string to_json(RegimeLabel label) const;
};

struct RegimeResult {
  RegimeLabel label = RegimeLabel::Inconclusive;
  RegimeDiagnostics diag;
};

// Errors: InsufficientTrajectory (< 6 points, m not strictly increasing or
// nonpositive, or span below a factor of 8).
RegimeResult classify(const std::vector<TrajectoryPoint>& trajectory,
                      double support_inf, double support_sup,
                      const ClassifyOptions& options = {});

}  // namespace goodhart
