#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mscal/calibrator.hpp"

namespace mscal {

// One batch job, fully specified: the estimator model and prior, the filter
// and strategy settings, the simulated apparatus, and the artifact paths.
// All times are seconds and all frequencies angular (rad/s).
struct RunConfig {
  ModelConfig model;

  // prior widths; zeros resolve to the standard prior for the model
  // (20% of the optimal coupling, 2 kHz on both frequencies, 0.16 pi)
  Eigen::Vector4d prior_sigma = Eigen::Vector4d::Zero();

  int particles = 10000;
  StrategyKind strategy = StrategyKind::kVarianceMin;
  SettingMenu menu = SettingMenu::standard();
  StopThresholds stop{};  // rabi = 0 resolves to the standard thresholds
  double estimator_depolarizing = 0.01;
  int shots_per_iteration = 100;
  int max_iterations = 60;
  double resample_shrinkage = 0.98;

  HiddenTruth truth;  // simulated apparatus miscalibration
  NoiseConfig noise;  // simulated readout mixing and per-shot drift

  // study parameters (capture cells, curve sampling, endpoint collection)
  std::vector<double> capture_distances{1.0, 2.0};
  std::vector<int> capture_particles{10000, 500};
  int capture_trials = 30;
  int curve_points = 41;
  double curve_span = 4.0;  // curve half-width in units of the stop thresholds
  int endpoint_runs = 50;
  bool rb_check = false;  // sequence-level cross-check of the infidelity proxy

  std::uint64_t seed = 1;
  unsigned threads = 0;
  bool confirm = true;
  bool retry_on_reject = true;  // one automatic re-run after a rejected confirmation
  std::filesystem::path grid_dir = "grids";
  std::filesystem::path out_dir = ".";

  void validate() const;
  GaussianPrior resolved_prior() const;
  CalibrationConfig calibration() const;

  // Hash of every result-affecting field except the seed; recorded in all
  // outputs so artifacts from different configurations are distinguishable.
  std::uint64_t digest() const;
};

// Strict parser for the flat TOML subset used by run configurations:
// [section] headers, key = value with strings, numbers, booleans and
// homogeneous arrays, # comments.  Unknown or duplicate keys are errors.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

// Canonical grid file name for a menu setting, e.g. "ms-3g-000mrad.grid".
std::string grid_filename(const MeasurementSetting& setting);

}  // namespace mscal
