#include "mscal/virtual_lab.hpp"

#include <cmath>
#include <stdexcept>
#include <string_view>

#include "mscal/physics.hpp"

namespace mscal {

void HiddenTruth::validate() const {
  if (!(rabi_scale > 0.0)) throw std::invalid_argument("rabi_scale must be > 0");
  if (!std::isfinite(rabi_scale) || !std::isfinite(stark_offset) || !std::isfinite(mode_offset) ||
      !std::isfinite(phase_offset))
    throw std::invalid_argument("hidden truth must be finite");
}

void NoiseConfig::validate() const {
  if (!(depolarizing >= 0.0 && depolarizing <= 0.5))
    throw std::invalid_argument("depolarizing must lie in [0, 0.5]");
  if (!drift.allFinite()) throw std::invalid_argument("drift rates must be finite");
}

ControlParams nominal_control(const ModelConfig& cfg) {
  return {cfg.gate_time, 0.0, delta_opt(cfg), 0.0};
}

GateParams realized_params(const ControlParams& control, const HiddenTruth& truth,
                           const ModelConfig& cfg) {
  const ControlParams ref = nominal_control(cfg);
  GateParams out;
  out.rabi = truth.rabi_scale * rabi_opt(cfg);
  out.centerline = truth.stark_offset + (control.centerline_freq - ref.centerline_freq);
  out.sideband = control.sideband_freq + truth.mode_offset;
  out.phase_step = wrap_pi(truth.phase_offset + control.phase);
  return out;
}

VirtualLab::VirtualLab(const ModelConfig& cfg, const HiddenTruth& truth, const NoiseConfig& noise,
                       std::uint64_t seed)
    : cfg_(cfg), truth_(truth), noise_(noise), rng_(seed) {
  cfg_.validate();
  truth_.validate();
  noise_.validate();
}

OutcomeDistribution VirtualLab::ideal_distribution(const ControlParams& control,
                                                   const MeasurementSetting& setting) const {
  ModelConfig run = cfg_;
  run.gate_time = control.gate_time;
  const GateParams theta = realized(control);
  for (;;) {
    try {
      return outcome_probabilities(theta, run, setting);
    } catch (const std::runtime_error& e) {
      if (run.n_max >= 96 || std::string_view(e.what()) != "truncation too small") throw;
      run.n_max = std::min(96, run.n_max + (run.n_max + 1) / 2);
    }
  }
}

ShotCounts VirtualLab::run_shots(const ControlParams& control, const MeasurementSetting& setting,
                                 long n) {
  if (n < 1) throw std::invalid_argument("need at least one shot");
  const OutcomeDistribution p = ideal_distribution(control, setting);
  const double d = noise_.depolarizing;
  const double c_gg = (1.0 - d) * p.p_gg + d * 0.25;
  const double c_one = c_gg + (1.0 - d) * p.p_one + d * 0.5;

  ShotCounts counts;
  for (long i = 0; i < n; ++i) {
    const double u = rng_.uniform();
    if (u < c_gg)
      ++counts.gg;
    else if (u < c_one)
      ++counts.one;
    else
      ++counts.ee;
  }

  truth_.rabi_scale += noise_.drift[0] * double(n);
  truth_.stark_offset += noise_.drift[1] * double(n);
  truth_.mode_offset += noise_.drift[2] * double(n);
  truth_.phase_offset += noise_.drift[3] * double(n);
  shots_used_ += n;
  return counts;
}

}  // namespace mscal
