#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "mscal/rng.hpp"
#include "mscal/types.hpp"

namespace mscal {

// The ground truth a calibration run has to discover, expressed as offsets
// from the nominal operating point of the model the lab was built with.
struct HiddenTruth {
  double rabi_scale = 1.0;    // true coupling relative to the nominal optimum
  double stark_offset = 0.0;  // centerline error [rad/s]
  double mode_offset = 0.0;   // motional-mode (sideband) error [rad/s]
  double phase_offset = 0.0;  // per-gate phase error [rad]

  void validate() const;  // rabi_scale > 0, all finite
};

// Detection and drift imperfections.  Drift moves the truth linearly with
// every shot taken; rates are per shot in truth units
// (rabi_scale, rad/s, rad/s, rad).
struct NoiseConfig {
  double depolarizing = 0.01;
  Eigen::Vector4d drift = Eigen::Vector4d::Zero();

  void validate() const;  // depolarizing in [0, 0.5]
};

// Knob settings an operator would start from: nominal gate time, reference
// centerline, loop-closure sideband, zero phase increment.
ControlParams nominal_control(const ModelConfig& cfg);

// Deterministic map from knob settings and hidden offsets to the physical
// gate parameters the ions actually see.  The true coupling is set by laser
// power, so it ignores the gate-time knob; the frequency and phase knobs add
// to their hidden offsets, so subtractive feedback cancels them.  At zero
// offsets and nominal control this returns the optimum exactly.
GateParams realized_params(const ControlParams& control, const HiddenTruth& truth,
                           const ModelConfig& cfg);

// Simulated experiment.  Outcome probabilities come from direct physics
// propagation — never from the interpolated grid, so the lab stays a
// stricter oracle than the estimator it is used to test.  Stateful: drift
// advances with every shot, and the shot stream is consumed in order.
class VirtualLab {
 public:
  VirtualLab(const ModelConfig& cfg, const HiddenTruth& truth, const NoiseConfig& noise,
             std::uint64_t seed);

  const ModelConfig& model() const { return cfg_; }
  const HiddenTruth& truth() const { return truth_; }
  const NoiseConfig& noise() const { return noise_; }
  long shots_used() const { return shots_used_; }

  GateParams realized(const ControlParams& control) const {
    return realized_params(control, truth_, cfg_);
  }

  // Noise-free physics probabilities at the realized parameters with the
  // gate time taken from the control knobs.  Enlarges the Fock truncation
  // internally if the excursion outgrows the configured cutoff.
  OutcomeDistribution ideal_distribution(const ControlParams& control,
                                         const MeasurementSetting& setting) const;

  // n multinomial draws from the depolarizing-mixed distribution, then the
  // truth drifts by rate * n.
  ShotCounts run_shots(const ControlParams& control, const MeasurementSetting& setting, long n);

 private:
  ModelConfig cfg_;
  HiddenTruth truth_;
  NoiseConfig noise_;
  RandomStream rng_;
  long shots_used_ = 0;
};

}  // namespace mscal
