#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "mscal/particle_filter.hpp"
#include "mscal/types.hpp"

namespace mscal {

// Measurement settings the scheduler may choose from, split by what they are
// first-order sensitive to: repeated fixed-phase sequences amplify Rabi and
// detuning errors, phase-stepped sequences amplify the inter-gate phase.
struct SettingMenu {
  std::vector<MeasurementSetting> rabi_sensitive;
  std::vector<MeasurementSetting> phase_sensitive;

  // {1, 3, 5, 7} gates at fixed phase plus {2, 4, 6} gates stepping by pi/4
  static SettingMenu standard();
  std::vector<MeasurementSetting> all() const;
  // the single-gate setting is the universal fallback and must be present
  void validate() const;
};

// Convergence targets: calibration stops when every posterior standard
// deviation is strictly below its threshold.
struct StopThresholds {
  double rabi = 0.0;                    // rad/s, set from the current optimum
  double centerline = 150.0 * two_pi;   // rad/s
  double sideband = 200.0 * two_pi;     // rad/s
  double phase = 0.028 * pi;            // rad

  static StopThresholds standard(double rabi_optimum) {
    StopThresholds t;
    t.rabi = 0.02 * rabi_optimum;
    return t;
  }
  Eigen::Vector4d vec() const { return {rabi, centerline, sideband, phase}; }
  void validate() const;
};

// Largest admissible posterior standard deviation per setting and parameter:
// beyond it the setting's outcome curve has passed its nearest extremum and
// the likelihood turns ambiguous.  The single-gate fallback carries no limits.
struct SettingThresholds {
  std::vector<std::pair<MeasurementSetting, Eigen::Vector4d>> limits;

  const Eigen::Vector4d* find(const MeasurementSetting& s) const;
};

// Outcome probabilities of one shot for a given setting and parameter point;
// std::nullopt marks points outside the likelihood model's support.  Must be
// callable concurrently.
using SettingLikelihood =
    std::function<std::optional<OutcomeDistribution>(const MeasurementSetting&, const GateParams&)>;

// Per-parameter posterior variance expected after one further shot with this
// setting: sum over the three outcome classes of (class probability) x
// (variance of the reweighted posterior).  Uses the same depolarized
// likelihood convention as the filter update.
Eigen::Vector4d expected_posterior_variance(const ParticleFilter& filter,
                                            const MeasurementSetting& setting,
                                            const SettingLikelihood& likelihood,
                                            double depolarizing = 0.01, unsigned threads = 0);

// Score X_s = sum of expected variances over squared stop thresholds.
double score_setting(const Eigen::Vector4d& expected_variance, const StopThresholds& stop);

// Setting with the lowest score; ties broken by fewer gates, then fixed-phase
// first.
MeasurementSetting select_variance_min(const ParticleFilter& filter, const SettingMenu& menu,
                                       const StopThresholds& stop,
                                       const SettingLikelihood& likelihood,
                                       double depolarizing = 0.01, unsigned threads = 0);

// 1-D scans of the ground-return probability about the optimum: each
// threshold is the distance from the optimum to the nearest non-central local
// extremum (range edge if none).  Scan ranges follow the production grid;
// points_per_side controls scan resolution.
SettingThresholds derive_setting_thresholds(const SettingMenu& menu, const ModelConfig& cfg,
                                            int points_per_side = 120, unsigned threads = 0);

// Alternating-class heuristic: restrict to the parity's sensitivity class
// (even = rabi), drop settings whose threshold any current standard deviation
// exceeds, return the max-gate survivor, else the single-gate fallback.
MeasurementSetting select_thresholded(const ParticleFilter& filter, const SettingMenu& menu,
                                      const SettingThresholds& thresholds, long parity);

// True when every posterior standard deviation is strictly below threshold.
bool should_stop(const ParticleFilter& filter, const StopThresholds& stop);

}  // namespace mscal
