#pragma once

#include <complex>
#include <vector>

#include "mscal/types.hpp"

namespace mscal {

using Matrix4cd = Eigen::Matrix4cd;
using VectorXcd = Eigen::VectorXcd;

// Collective spin operators for two qubits, basis (gg, ge, eg, ee),
// sigma_z|e> = +|e>.  S_a = (sigma_a,1 + sigma_a,2)/2.
Matrix4cd spin_x();
Matrix4cd spin_y();
Matrix4cd spin_z();
Matrix4cd spin_phi(double phi);  // S_phi = S_y cos(phi) + S_x sin(phi)

// MS_phi(theta) = exp(-i theta S_phi^2).  Note the interaction below drives
// exp(+i theta S_phi^2) for blue detuning, i.e. ideal_ms_unitary(-pi/2, phi)
// at the gate point.
Matrix4cd ideal_ms_unitary(double theta, double phi);

// Pulse envelope: half-Blackman ramps of length ramp_time on both sides of a
// plateau, total duration gate_time + ramp_time.  Throws "out of pulse
// window" outside [0, total].
double pulse_envelope(double t, const ModelConfig& cfg);

// Loop-closure detuning delta_opt = 2 pi K / t_g.
double delta_opt(const ModelConfig& cfg);

// Rabi frequency satisfying the gate condition theta(T) = pi/2.
// rabi_opt_constant ignores the envelope (pi / (eta t_g)); rabi_opt rescales
// for the configured ramps via the exact theta double integral.
double rabi_opt_constant(const ModelConfig& cfg);
double rabi_opt(const ModelConfig& cfg);

// theta(T) = eta^2 Im int_0^T dt' int_0^t' dt'' Om(t')Om(t'') e^{i d (t'-t'')}
// for Om(t) = rabi * envelope(t).
double entangling_angle(double rabi, double delta, const ModelConfig& cfg);

// Nominal optimum Theta_opt = (rabi_opt, 0, delta_opt, 0).
GateParams optimal_params(const ModelConfig& cfg);

// Joint spin (x) motion state: amplitude index s*(n_max+1) + n.
struct SpinMotionState {
  VectorXcd amps;
  int n_max = 0;

  OutcomeDistribution outcome_probabilities() const;
  double fock_population(int n) const;       // summed over spin
  Eigen::Matrix4cd reduced_spin() const;     // motion traced out
  double spin_purity() const;                // tr(rho_spin^2)
};

SpinMotionState ground_state(const ModelConfig& cfg);  // |gg> (x) |initial_fock>

// Propagate through n_gates back-to-back shaped pulses of the interaction
//   H(t) = -eta Om(t) (a^dag e^{i delta t} + a e^{-i delta t}) S_{phi(t)},
//   phi(t) = phase0 + k (phase_target + dphi) + omega_cl t   during gate k,
// with t continuous across the sequence.  Fixed-step piecewise-constant
// midpoint exponential, unconditionally norm-preserving.  Throws
// "truncation too small" if the top two Fock levels exceed 1e-4 population
// after any gate, "integrator step too coarse" on norm drift > 1e-6.
SpinMotionState propagate_sequence(const GateParams& theta, const ModelConfig& cfg,
                                   const MeasurementSetting& setting,
                                   const SpinMotionState* initial = nullptr,
                                   double phase0 = 0.0);

OutcomeDistribution outcome_probabilities(const GateParams& theta, const ModelConfig& cfg,
                                          const MeasurementSetting& setting);

// Closed-form single-gate evolution for omega_cl = 0 and a constant pulse:
//   U(t) = D[gamma(t) S_phi] exp(+i theta(t) S_phi^2),
//   gamma(t) = i eta Om (e^{i delta t} - 1)/(i delta).
// The Magnus series terminates, so this is exact (up to shared Fock
// truncation).  Throws "analytic form invalid" for omega_cl != 0 or ramped
// pulses.
struct AnalyticEvolution {
  std::complex<double> gamma;
  double theta = 0.0;
  Eigen::MatrixXcd unitary;  // on the truncated joint space, laser phase 0
};
AnalyticEvolution analytic_evolution(const GateParams& theta, const ModelConfig& cfg, double t);

// Spin Kraus operators of one gate from the initial Fock state, composed with
// the inter-gate frame slip exp(-i (dphi + omega_cl T) S_z): the per-gate
// channel a long sequence telescopes into.
std::vector<Matrix4cd> gate_spin_kraus(const GateParams& theta, const ModelConfig& cfg);

}  // namespace mscal
