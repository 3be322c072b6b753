#include "mscal/calibrator.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "mscal/physics.hpp"

namespace mscal {

GridStore::GridStore(const ModelConfig& grid_model)
    : model_(grid_model), rabi_opt_grid_(rabi_opt(grid_model)) {
  model_.validate();
}

void GridStore::add(GridTable table) {
  if (table.spec.digest != model_digest(model_))
    throw std::invalid_argument("model does not match grid digest");
  if (find(table.spec.setting)) throw std::invalid_argument("duplicate grid for setting");
  grids_.emplace_back(table.spec.setting, Interpolator(table));
}

const Interpolator* GridStore::find(const MeasurementSetting& setting) const {
  for (const auto& [s, interp] : grids_)
    if (s == setting) return &interp;
  return nullptr;
}

SettingLikelihood GridStore::likelihood(double gate_time) const {
  if (!(gate_time > 0)) throw std::invalid_argument("gate_time must be > 0");
  const double scale = gate_time / model_.gate_time;
  const QueryFrame frame{rabi_opt_grid_ / scale, scale};
  return [this, frame](const MeasurementSetting& s,
                       const GateParams& theta) -> std::optional<OutcomeDistribution> {
    const Interpolator* interp = find(s);
    if (!interp) throw std::logic_error("no grid for setting");
    const std::array<double, 4> coords = frame.coordinates(theta);
    if (!interp->inside(coords)) return std::nullopt;
    return interp->query(coords);
  };
}

GaussianPrior standard_prior(const ModelConfig& cfg) {
  GaussianPrior prior;
  prior.mean = optimal_params(cfg);
  prior.sigma << 0.2 * rabi_opt(cfg), two_pi * 2e3, two_pi * 2e3, 0.16 * pi;
  return prior;
}

void CalibrationConfig::validate() const {
  model.validate();
  prior.validate();
  menu.validate();
  if (stop.rabi != 0.0) stop.validate();
  if (particles < 2) throw std::invalid_argument("need at least two particles");
  if (shots_per_iteration < 1) throw std::invalid_argument("shots_per_iteration must be >= 1");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  if (!(depolarizing >= 0.0 && depolarizing <= 0.5))
    throw std::invalid_argument("depolarizing must lie in [0, 0.5]");
}

void apply_feedback(ControlParams& control, const GateParams& mean, ParticleFilter& filter,
                    const ModelConfig& model) {
  if (!(mean.rabi > 0) || !mean.vec().allFinite())
    throw std::runtime_error("invalid estimate, feedback refused");
  // optimum in the similarity frame of the current gate time
  const double rabi_opt_now = rabi_opt(model) * model.gate_time / control.gate_time;
  control.gate_time *= rabi_opt_now / mean.rabi;
  const double delta_new = two_pi * model.loops / control.gate_time;

  const Eigen::Vector4d shift{0.0, -mean.centerline, delta_new - mean.sideband, -mean.phase_step};
  control.centerline_freq += shift[1];
  control.sideband_freq += shift[2];
  control.phase = wrap_pi(control.phase + shift[3]);
  filter.translate(shift);
}

StopThresholds resolved_stop(const CalibrationConfig& config) {
  return config.stop.rabi != 0.0 ? config.stop : StopThresholds::standard(rabi_opt(config.model));
}

CalibrationRecord run_calibration(VirtualLab& lab, const GridStore& grids,
                                  const CalibrationConfig& config, std::uint64_t seed) {
  config.validate();
  for (const MeasurementSetting& s : config.menu.all())
    if (!grids.find(s)) throw std::invalid_argument("missing grid for setting");

  const auto t0 = std::chrono::steady_clock::now();
  const StopThresholds stop = resolved_stop(config);
  SettingThresholds limits;
  if (config.strategy == StrategyKind::kThresholded)
    limits = config.setting_limits
                 ? *config.setting_limits
                 : derive_setting_thresholds(config.menu, config.model, 120, config.threads);

  ParticleFilter filter(config.prior, config.particles, seed);
  ControlParams control = nominal_control(config.model);

  CalibrationRecord record;
  record.seed = seed;
  record.stop_reason = "not converged";
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const SettingLikelihood lk = grids.likelihood(control.gate_time);
    const MeasurementSetting setting =
        config.strategy == StrategyKind::kVarianceMin
            ? select_variance_min(filter, config.menu, stop, lk, config.depolarizing,
                                  config.threads)
            : select_thresholded(filter, config.menu, limits, iter);

    const ShotCounts counts = lab.run_shots(control, setting, config.shots_per_iteration);
    filter.update(
        counts, [&](const GateParams& theta) { return lk(setting, theta); }, config.depolarizing,
        config.threads);
    const FilterEstimate est = filter.estimates();
    filter.resample(config.resample_shrinkage);
    apply_feedback(control, est.mean, filter, config.model);

    record.iterations.push_back({setting, counts, est.mean, est.variance, control});
    record.total_shots += counts.total();
    if (should_stop(filter, stop)) {
      record.stop_reason = "thresholds met";
      break;
    }
  }
  record.final_control = control;
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return record;
}

ConfirmationResult confirm(VirtualLab& lab, const ControlParams& control) {
  ConfirmationResult result;
  result.fixed_ground = lab.run_shots(control, {8, 0.0}, 100).gg;
  result.stepped_ground = lab.run_shots(control, {6, pi / 4}, 100).gg;
  result.accept = result.fixed_ground >= 85 && result.stepped_ground >= 85;
  return result;
}

}  // namespace mscal
