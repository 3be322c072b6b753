#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace mscal {

inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double pi = std::numbers::pi;

// Wrap an angle to (-pi, pi].
inline double wrap_pi(double x) {
  x = std::remainder(x, two_pi);  // (-pi, pi], except remainder gives [-pi, pi]
  if (x <= -pi) x += two_pi;
  return x;
}

// Gate parameters Theta = (Omega, omega_cl, delta, dphi).
// Angular frequencies in rad/s; dphi is the per-gate phase step error in rad,
// kept in (-pi, pi].
struct GateParams {
  double rabi = 0.0;        // Omega, carrier-coupling Rabi frequency
  double centerline = 0.0;  // omega_cl, asymmetric (centerline) detuning
  double sideband = 0.0;    // delta, symmetric sideband detuning
  double phase_step = 0.0;  // dphi, extra phase accumulated between gates

  Eigen::Vector4d vec() const { return {rabi, centerline, sideband, phase_step}; }
  static GateParams from_vec(const Eigen::Vector4d& v) {
    return {v[0], v[1], v[2], wrap_pi(v[3])};
  }
};

// Control parameters Theta_c = (t_g, f_cl, f_sb, phi): the knobs the
// calibrator actually turns.  f_cl is relative to a lab reference; f_sb is the
// absolute sideband-detuning setting; phi is the per-gate phase increment knob.
struct ControlParams {
  double gate_time = 100e-6;     // t_g [s]
  double centerline_freq = 0.0;  // f_cl [rad/s]
  double sideband_freq = 0.0;    // f_sb [rad/s]
  double phase = 0.0;            // phi [rad]
};

// Physics/integration configuration shared by the simulator and the grids.
struct ModelConfig {
  double lamb_dicke = 0.05;      // eta
  int n_max = 10;                // Fock truncation (levels 0..n_max)
  int initial_fock = 0;
  double gate_time = 100e-6;     // t_g [s]
  double ramp_time = 4e-6;       // half-Blackman ramp duration each side [s]
  double integrator_step = 0.0;  // dt [s]; 0 selects gate_time/3000
  int loops = 1;                 // phase-space loop count K, delta_opt = 2 pi K / t_g

  double step() const { return integrator_step > 0 ? integrator_step : gate_time / 3000.0; }
  double total_duration() const { return gate_time + ramp_time; }
  void validate() const {
    if (lamb_dicke <= 0) throw std::invalid_argument("lamb_dicke must be > 0");
    if (n_max < 3) throw std::invalid_argument("n_max must be >= 3");
    if (initial_fock < 0 || initial_fock > n_max)
      throw std::invalid_argument("initial_fock outside truncation");
    if (gate_time <= 0) throw std::invalid_argument("gate_time must be > 0");
    if (ramp_time < 0 || ramp_time > gate_time)
      throw std::invalid_argument("ramp_time must lie in [0, gate_time]");
    if (loops < 1) throw std::invalid_argument("loops must be >= 1");
  }
};

// One measurement configuration: n_gates applications with the laser phase of
// gate k advanced by k*phase_target.
struct MeasurementSetting {
  int n_gates = 1;
  double phase_target = 0.0;

  bool operator==(const MeasurementSetting& o) const {
    return n_gates == o.n_gates && phase_target == o.phase_target;
  }
};

// Probabilities of the three distinguishable outcomes (both dark, one bright,
// both bright).
struct OutcomeDistribution {
  double p_gg = 0.0;
  double p_one = 0.0;
  double p_ee = 0.0;

  double sum() const { return p_gg + p_one + p_ee; }
  Eigen::Vector3d vec() const { return {p_gg, p_one, p_ee}; }
};

struct ShotCounts {
  long gg = 0;
  long one = 0;
  long ee = 0;
  long total() const { return gg + one + ee; }
};

}  // namespace mscal
