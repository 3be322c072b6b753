#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mscal/grid.hpp"
#include "mscal/particle_filter.hpp"
#include "mscal/strategy.hpp"
#include "mscal/virtual_lab.hpp"

namespace mscal {

enum class StrategyKind { kVarianceMin, kThresholded };

// Likelihood grids for the menu settings, queried in the similarity frame of
// the current gate time so one set of grids survives gate-time feedback.
class GridStore {
 public:
  explicit GridStore(const ModelConfig& grid_model);

  // Takes ownership of a built or loaded grid.  The table must match the
  // store's model digest, one grid per setting.
  void add(GridTable table);

  const ModelConfig& grid_model() const { return model_; }
  const Interpolator* find(const MeasurementSetting& setting) const;

  // Likelihood bound to the given gate time; out-of-support queries yield
  // nullopt.  The store must outlive the returned function.
  SettingLikelihood likelihood(double gate_time) const;

 private:
  ModelConfig model_;
  double rabi_opt_grid_;
  std::vector<std::pair<MeasurementSetting, Interpolator>> grids_;
};

// Prior matched to typical uncertainties after a coarse manual pre-calibration:
// sigma = (0.2 Omega_opt, 2 kHz, 2 kHz, 0.16 pi), centered on the optimum.
GaussianPrior standard_prior(const ModelConfig& cfg);

struct CalibrationConfig {
  ModelConfig model;  // frame the grids were built in
  GaussianPrior prior;
  int particles = 10000;
  StrategyKind strategy = StrategyKind::kVarianceMin;
  SettingMenu menu = SettingMenu::standard();
  StopThresholds stop{};  // rabi = 0 resolves to StopThresholds::standard
  // prior-width limits for the thresholded strategy; derived from the model
  // at run start when not supplied
  std::optional<SettingThresholds> setting_limits;
  double depolarizing = 0.01;  // estimator's outcome-mixing probability
  int shots_per_iteration = 100;
  int max_iterations = 60;
  double resample_shrinkage = 0.98;
  unsigned threads = 0;

  void validate() const;
};

// The thresholds a run with this configuration actually stops against.
StopThresholds resolved_stop(const CalibrationConfig& config);

struct IterationEntry {
  MeasurementSetting setting;
  ShotCounts counts;
  GateParams mean;           // posterior mean, before the feedback shift
  Eigen::Vector4d variance;  // posterior variance at the estimate
  ControlParams control;     // knob settings after feedback
};

struct CalibrationRecord {
  std::vector<IterationEntry> iterations;
  long total_shots = 0;
  double wall_seconds = 0.0;
  std::string stop_reason;  // "thresholds met" or "not converged"
  ControlParams final_control;
  std::uint64_t seed = 0;

  bool converged() const { return stop_reason == "thresholds met"; }
};

// Retunes the knobs so the posterior mean lands on the optimum: rescale the
// gate time to match the estimated coupling, recompute loop closure for the
// new time, subtract the frequency and phase estimates.  The filter shifts
// with the corrections so it becomes the next iteration's prior.
void apply_feedback(ControlParams& control, const GateParams& mean, ParticleFilter& filter,
                    const ModelConfig& model);

// Closed loop: select setting, take a batch of shots, Bayes update, estimate,
// resample, feed back, check the stop thresholds.  Deterministic for a fixed
// seed and lab state (wall_seconds excepted).
CalibrationRecord run_calibration(VirtualLab& lab, const GridStore& grids,
                                  const CalibrationConfig& config, std::uint64_t seed);

// Post-calibration check: 8 fixed-phase gates and 6 quarter-turn-stepped
// gates, 100 shots each; both ideally return every population to the ground
// state.  Accept when both ground counts reach 85.
struct ConfirmationResult {
  long fixed_ground = 0;
  long stepped_ground = 0;
  bool accept = false;
};

ConfirmationResult confirm(VirtualLab& lab, const ControlParams& control);

}  // namespace mscal
