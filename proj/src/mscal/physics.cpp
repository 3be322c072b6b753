#include "mscal/physics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

namespace mscal {

using cd = std::complex<double>;
namespace {
constexpr cd I{0.0, 1.0};

Eigen::Matrix2cd pauli(char a) {
  Eigen::Matrix2cd m;
  switch (a) {  // basis (g, e), sigma_z|e> = +|e>
    case 'x': m << 0, 1, 1, 0; break;
    case 'y': m << 0, I, -I, 0; break;
    default:  m << -1, 0, 0, 1; break;
  }
  return m;
}

Matrix4cd collective(char a) {
  Eigen::Matrix2cd s = pauli(a), id = Eigen::Matrix2cd::Identity();
  Matrix4cd out = Matrix4cd::Zero();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l)
          out(2 * i + k, 2 * j + l) = 0.5 * (s(i, j) * id(k, l) + id(i, j) * s(k, l));
  return out;
}
}  // namespace

Matrix4cd spin_x() { return collective('x'); }
Matrix4cd spin_y() { return collective('y'); }
Matrix4cd spin_z() { return collective('z'); }

Matrix4cd spin_phi(double phi) { return std::cos(phi) * spin_y() + std::sin(phi) * spin_x(); }

Matrix4cd ideal_ms_unitary(double theta, double phi) {
  Eigen::SelfAdjointEigenSolver<Matrix4cd> es(spin_phi(phi));
  Eigen::Vector4cd ph;
  for (int j = 0; j < 4; ++j) {
    double m = es.eigenvalues()[j];
    ph[j] = std::exp(-I * theta * m * m);
  }
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

double pulse_envelope(double t, const ModelConfig& cfg) {
  const double T = cfg.total_duration(), r = cfg.ramp_time;
  if (t < 0.0 || t > T) throw std::domain_error("out of pulse window");
  if (r == 0.0) return 1.0;
  auto blackman = [](double x) {
    return 0.42 - 0.5 * std::cos(two_pi * x) + 0.08 * std::cos(2.0 * two_pi * x);
  };
  if (t < r) return blackman(t / (2.0 * r));
  if (t > T - r) return blackman((T - t) / (2.0 * r));
  return 1.0;
}

double delta_opt(const ModelConfig& cfg) { return two_pi * cfg.loops / cfg.gate_time; }

double rabi_opt_constant(const ModelConfig& cfg) {
  return pi * std::sqrt(double(cfg.loops)) / (cfg.lamb_dicke * cfg.gate_time);
}

double entangling_angle(double rabi, double delta, const ModelConfig& cfg) {
  const double eta = cfg.lamb_dicke, T = cfg.total_duration();
  if (cfg.ramp_time == 0.0) {
    const double x = delta * T;
    double shape = std::abs(x) < 1e-8 ? delta * T * T * T / 6.0
                                      : (T - std::sin(x) / delta) / delta;
    return eta * eta * rabi * rabi * shape;
  }
  // theta = eta^2 Im int_0^T dt' Om(t') e^{i d t'} int_0^t' dt'' Om(t'') e^{-i d t''}
  const int N = 6000;
  const double h = T / N;
  cd g = 0.0;   // running inner integral
  double acc = 0.0;
  double e_prev = pulse_envelope(0.0, cfg);
  cd f_prev = e_prev;  // e^{-i d 0} = 1
  double o_prev = 0.0;
  for (int k = 1; k <= N; ++k) {
    const double t = k * h;
    const double e = pulse_envelope(t, cfg);
    const cd f = e * std::exp(-I * delta * t);
    g += 0.5 * (f_prev + f) * h;
    const double o = (e * std::exp(I * delta * t) * g).imag();
    acc += 0.5 * (o_prev + o) * h;
    e_prev = e; f_prev = f; o_prev = o;
  }
  return eta * eta * rabi * rabi * acc;
}

double rabi_opt(const ModelConfig& cfg) {
  if (cfg.ramp_time == 0.0) return rabi_opt_constant(cfg);
  const double unit = entangling_angle(1.0, delta_opt(cfg), cfg);  // theta at Om = 1
  return std::sqrt(pi * cfg.loops / (2.0 * unit));
}

GateParams optimal_params(const ModelConfig& cfg) {
  return {rabi_opt(cfg), 0.0, delta_opt(cfg), 0.0};
}

OutcomeDistribution SpinMotionState::outcome_probabilities() const {
  const int n = n_max + 1;
  Eigen::Vector4d p;
  for (int s = 0; s < 4; ++s) p[s] = amps.segment(s * n, n).squaredNorm();
  return {p[0], p[1] + p[2], p[3]};
}

double SpinMotionState::fock_population(int f) const {
  const int n = n_max + 1;
  double p = 0.0;
  for (int s = 0; s < 4; ++s) p += std::norm(amps[s * n + f]);
  return p;
}

Eigen::Matrix4cd SpinMotionState::reduced_spin() const {
  const int n = n_max + 1;
  Matrix4cd rho = Matrix4cd::Zero();
  for (int s = 0; s < 4; ++s)
    for (int r = 0; r < 4; ++r)
      rho(s, r) = amps.segment(s * n, n).dot(amps.segment(r * n, n));
  // .dot conjugates the left argument; rho(s,r) = sum_n conj(a_sn) a_rn is
  // rho^T of the usual convention, which has the same purity and diagonal.
  return rho.transpose();
}

double SpinMotionState::spin_purity() const {
  Matrix4cd rho = reduced_spin();
  return (rho * rho).trace().real();
}

SpinMotionState ground_state(const ModelConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_max + 1;
  SpinMotionState st{VectorXcd::Zero(4 * n), cfg.n_max};
  st.amps[cfg.initial_fock] = 1.0;
  return st;
}

namespace {

// Per-step evolution in the S_phi eigenbasis.  With
//   X(al) = a^dag e^{i al} + a e^{-i al} = F(al) Q F(al)^dag,  Q = a + a^dag,
//   S_phi = e^{+i phi S_z} S_y e^{-i phi S_z},                S_y = W My W^dag,
// the exact step exponential factorizes into diagonal phases, the fixed
// eigenbasis of Q, and 4x4 spin mixing:
//   exp(-i dt H) = (Z W (x) 1) diag_m[ F Vq e^{+i s m Lq} Vq^T F^dag ] (W^dag Z^dag (x) 1),
// s = dt eta Om(t).
class Stepper {
 public:
  explicit Stepper(int n_max) : n_(n_max + 1) {
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n_, n_);
    for (int k = 1; k < n_; ++k) Q(k - 1, k) = Q(k, k - 1) = std::sqrt(double(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esq(Q);
    Lq_ = esq.eigenvalues();
    Vq_ = esq.eigenvectors().cast<cd>();
    VqT_ = Vq_.transpose();

    Eigen::SelfAdjointEigenSolver<Matrix4cd> esy(spin_y());
    W_ = esy.eigenvectors();
    for (int j = 0; j < 4; ++j) {
      const long m = std::lround(esy.eigenvalues()[j]);
      if (m == 1) jp_ = j;
      if (m == -1) jm_ = j;
    }

    F_ = VectorXcd::Ones(n_);
    expp_.resize(n_);
    expm_.resize(n_);
    cols_.resize(n_, 2);
    tmp_.resize(n_, 2);
  }

  // Reset the sideband phase recurrence for a gate starting at absolute time
  // t0 with step dt: F tracks e^{i delta t_mid n}.
  void start_gate(double t0, double dt, double delta, double wcl) {
    const double al0 = delta * (t0 + 0.5 * dt);
    for (int k = 0; k < n_; ++k) F_[k] = std::exp(I * al0 * double(k));
    rotF_.resize(n_);
    for (int k = 0; k < n_; ++k) rotF_[k] = std::exp(I * delta * dt * double(k));
    zphase_ = std::exp(I * wcl * (t0 + 0.5 * dt));
    zrot_ = std::exp(I * wcl * dt);
    cached_s_ = std::numeric_limits<double>::quiet_NaN();
  }

  // One midpoint step; phi_gate is the gate's stepped laser phase, s = dt eta Om_env.
  void step(Eigen::MatrixXcd& Psi, double s, double phi_gate) {
    const cd zg = std::exp(I * phi_gate) * zphase_;  // e^{i phi(t_mid)}
    Matrix4cd ZW = W_;
    ZW.row(0) *= std::conj(zg);  // Z = diag(e^{-i phi}, 1, 1, e^{+i phi}) on (gg, ge, eg, ee)
    ZW.row(3) *= zg;
    Psi = Psi * ZW.conjugate();  // apply (W^dag Z^dag (x) 1) from the left

    if (s != cached_s_) {  // constant across the pulse plateau
      cached_s_ = s;
      for (int k = 0; k < n_; ++k) {
        const cd e = std::exp(I * s * Lq_[k]);
        expp_[k] = e;
        expm_[k] = std::conj(e);
      }
    }
    cols_.col(0) = F_.conjugate().cwiseProduct(Psi.col(jp_));
    cols_.col(1) = F_.conjugate().cwiseProduct(Psi.col(jm_));
    tmp_.noalias() = VqT_ * cols_;
    tmp_.col(0).array() *= expp_.array();
    tmp_.col(1).array() *= expm_.array();
    cols_.noalias() = Vq_ * tmp_;
    Psi.col(jp_) = F_.cwiseProduct(cols_.col(0));   // m = 0 columns are untouched
    Psi.col(jm_) = F_.cwiseProduct(cols_.col(1));

    Psi = Psi * ZW.transpose();

    F_ = F_.cwiseProduct(rotF_);
    zphase_ *= zrot_;
  }

 private:
  int n_;
  Eigen::VectorXd Lq_;
  Eigen::MatrixXcd Vq_, VqT_;
  Matrix4cd W_;
  int jp_ = -1, jm_ = -1;  // spin eigencolumns with m = +1 / -1
  VectorXcd F_, rotF_, expp_, expm_;
  cd zphase_{1.0, 0.0}, zrot_{1.0, 0.0};
  double cached_s_ = 0.0;
  Eigen::MatrixXcd cols_, tmp_;
};

}  // namespace

SpinMotionState propagate_sequence(const GateParams& theta, const ModelConfig& cfg,
                                   const MeasurementSetting& setting,
                                   const SpinMotionState* initial, double phase0) {
  cfg.validate();
  if (theta.rabi <= 0) throw std::invalid_argument("rabi must be > 0");
  if (setting.n_gates < 1 || setting.n_gates > 8)
    throw std::invalid_argument("n_gates outside [1, 8]");

  const int n = cfg.n_max + 1;
  SpinMotionState st = initial ? *initial : ground_state(cfg);
  if (st.amps.size() != 4 * n) throw std::invalid_argument("state size mismatch");

  const double T = cfg.total_duration();
  const int n_steps = std::max<int>(1, int(std::ceil(T / cfg.step() - 1e-12)));
  const double dt = T / n_steps;

  Stepper stp(cfg.n_max);
  Eigen::MatrixXcd Psi(n, 4);
  for (int s = 0; s < 4; ++s) Psi.col(s) = st.amps.segment(s * n, n);

  for (int k = 0; k < setting.n_gates; ++k) {
    const double pg = phase0 + k * (setting.phase_target + theta.phase_step);
    stp.start_gate(k * T, dt, theta.sideband, theta.centerline);
    for (int i = 0; i < n_steps; ++i) {
      const double env = pulse_envelope((i + 0.5) * dt, cfg);
      stp.step(Psi, dt * cfg.lamb_dicke * theta.rabi * env, pg);
    }
    const double leak = Psi.row(n - 1).squaredNorm() + Psi.row(n - 2).squaredNorm();
    if (leak > 1e-4) throw std::runtime_error("truncation too small");
  }

  const double nrm2 = Psi.squaredNorm();
  if (std::abs(nrm2 - 1.0) > 1e-6) throw std::runtime_error("integrator step too coarse");
  Psi /= std::sqrt(nrm2);
  for (int s = 0; s < 4; ++s) st.amps.segment(s * n, n) = Psi.col(s);
  return st;
}

OutcomeDistribution outcome_probabilities(const GateParams& theta, const ModelConfig& cfg,
                                          const MeasurementSetting& setting) {
  return propagate_sequence(theta, cfg, setting).outcome_probabilities();
}

AnalyticEvolution analytic_evolution(const GateParams& theta, const ModelConfig& cfg, double t) {
  cfg.validate();
  if (theta.centerline != 0.0 || cfg.ramp_time != 0.0)
    throw std::runtime_error("analytic form invalid");

  const double eta = cfg.lamb_dicke, Om = theta.rabi, d = theta.sideband;
  AnalyticEvolution out;
  if (std::abs(d * t) < 1e-9) {
    out.gamma = I * eta * Om * t;
    out.theta = eta * eta * Om * Om * d * t * t * t / 6.0;
  } else {
    out.gamma = eta * Om * (std::exp(I * d * t) - 1.0) / d;
    out.theta = eta * eta * Om * Om / d * (t - std::sin(d * t) / d);
  }

  const int n = cfg.n_max + 1;
  Eigen::MatrixXcd ad = Eigen::MatrixXcd::Zero(n, n);
  for (int k = 1; k < n; ++k) ad(k, k - 1) = std::sqrt(double(k));

  Eigen::SelfAdjointEigenSolver<Matrix4cd> esy(spin_y());
  out.unitary = Eigen::MatrixXcd::Zero(4 * n, 4 * n);
  for (int j = 0; j < 4; ++j) {
    const double m = esy.eigenvalues()[j];
    const cd g = out.gamma * m;
    // D(g) = exp(g a^dag - g* a) = exp(i H), H = -i(g a^dag - g* a) Hermitian
    Eigen::MatrixXcd H = -I * (g * ad - std::conj(g) * ad.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> esd(H);
    VectorXcd ph(n);
    for (int k = 0; k < n; ++k) ph[k] = std::exp(I * esd.eigenvalues()[k]);
    Eigen::MatrixXcd D = esd.eigenvectors() * ph.asDiagonal() * esd.eigenvectors().adjoint();
    D *= std::exp(I * out.theta * m * m);

    const Eigen::Vector4cd wj = esy.eigenvectors().col(j);
    for (int s = 0; s < 4; ++s)
      for (int r = 0; r < 4; ++r) {
        const cd c = wj[s] * std::conj(wj[r]);
        if (std::abs(c) > 0) out.unitary.block(s * n, r * n, n, n) += c * D;
      }
  }
  return out;
}

std::vector<Matrix4cd> gate_spin_kraus(const GateParams& theta, const ModelConfig& cfg) {
  const int n = cfg.n_max + 1;
  std::vector<Matrix4cd> K(n, Matrix4cd::Zero());
  for (int s = 0; s < 4; ++s) {
    SpinMotionState init{VectorXcd::Zero(4 * n), cfg.n_max};
    init.amps[s * n + cfg.initial_fock] = 1.0;
    SpinMotionState out = propagate_sequence(theta, cfg, {1, 0.0}, &init);
    for (int f = 0; f < n; ++f)
      for (int r = 0; r < 4; ++r) K[f](r, s) = out.amps[r * n + f];
  }
  // inter-gate frame slip exp(-i slip S_z), diagonal in the spin basis
  const double slip = theta.phase_step + theta.centerline * cfg.total_duration();
  Eigen::Vector4cd R{std::exp(I * slip), 1.0, 1.0, std::exp(-I * slip)};
  for (auto& k : K) k = R.asDiagonal() * k;
  return K;
}

}  // namespace mscal
