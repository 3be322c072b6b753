#include "mscal/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>

#include "mscal/parallel.hpp"
#include "mscal/physics.hpp"
#include "mscal/rng.hpp"

namespace mscal {

double miscalibration_infidelity(const GateParams& theta, const ModelConfig& cfg) {
  const std::vector<Matrix4cd> kraus = gate_spin_kraus(theta, cfg);
  const Matrix4cd target = ideal_ms_unitary(-pi / 2.0, 0.0);
  double fidelity = 0.0;
  for (const Matrix4cd& k : kraus) fidelity += std::norm((target.adjoint() * k).trace());
  fidelity /= 16.0;
  return std::clamp(1.0 - fidelity, 0.0, 1.0);
}

double benchmarking_infidelity(const GateParams& theta, const ModelConfig& cfg,
                               std::uint64_t seed, int sequences_per_length) {
  if (sequences_per_length < 1) throw std::invalid_argument("need at least one sequence");
  const std::vector<Matrix4cd> kraus = gate_spin_kraus(theta, cfg);
  const Matrix4cd ideal = ideal_ms_unitary(-pi / 2.0, 0.0);

  // the sixteen two-qubit Pauli layers
  std::array<Eigen::Matrix2cd, 4> pauli;
  const std::complex<double> i1(0.0, 1.0);
  pauli[0] = Eigen::Matrix2cd::Identity();
  pauli[1] << 0, 1, 1, 0;
  pauli[2] << 0, -i1, i1, 0;
  pauli[3] << 1, 0, 0, -1;
  std::array<Matrix4cd, 16> layer;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      Matrix4cd p;
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) p.block<2, 2>(2 * r, 2 * c) = pauli[a](r, c) * pauli[b];
      layer[4 * a + b] = p;
    }

  RandomStream rng(seed);
  const std::array<int, 4> lengths{2, 4, 8, 16};
  Eigen::Vector4d survival = Eigen::Vector4d::Zero();
  for (int li = 0; li < 4; ++li) {
    for (int s = 0; s < sequences_per_length; ++s) {
      Matrix4cd rho = Matrix4cd::Zero();
      rho(0, 0) = 1.0;
      Matrix4cd composite = Matrix4cd::Identity();
      for (int m = 0; m < lengths[li]; ++m) {
        const Matrix4cd& p = layer[int(rng.uniform() * 16.0)];
        const Matrix4cd twirled = p * rho * p.adjoint();
        Matrix4cd next = Matrix4cd::Zero();
        for (const Matrix4cd& k : kraus) next += k * twirled * k.adjoint();
        rho = next;
        composite = ideal * p * composite;
      }
      rho = composite.adjoint() * rho * composite;
      survival[li] += rho(0, 0).real();
    }
    survival[li] /= sequences_per_length;
  }

  // log-linear fit of survival vs sequence length; the slope is ln(decay)
  Eigen::Matrix2d ata = Eigen::Matrix2d::Zero();
  Eigen::Vector2d atb = Eigen::Vector2d::Zero();
  for (int li = 0; li < 4; ++li) {
    const Eigen::Vector2d row{double(lengths[li]), 1.0};
    ata += row * row.transpose();
    atb += row * std::log(std::max(survival[li], 1e-12));
  }
  const double decay = std::exp(ata.ldlt().solve(atb)[0]);
  return 0.75 * std::clamp(1.0 - decay, 0.0, 1.0);
}

InfidelityCurve infidelity_curve(int axis, const ModelConfig& cfg, double half_width, int points,
                                 unsigned threads) {
  if (axis < 0 || axis > 3) throw std::invalid_argument("axis must be in [0, 3]");
  if (points < 2) throw std::invalid_argument("need at least two curve points");
  if (!(half_width > 0)) throw std::invalid_argument("half_width must be > 0");

  InfidelityCurve curve;
  curve.axis = axis;
  curve.offsets = Eigen::VectorXd::LinSpaced(points, -half_width, half_width);
  curve.infidelity.resize(points);
  const Eigen::Vector4d opt = optimal_params(cfg).vec();
  parallel_for(points, [&](std::size_t i) {
    Eigen::Vector4d v = opt;
    v[axis] += curve.offsets[Eigen::Index(i)];
    curve.infidelity[Eigen::Index(i)] = miscalibration_infidelity(GateParams::from_vec(v), cfg);
  }, threads);
  return curve;
}

double starting_distance(const GateParams& start, const GaussianPrior& prior) {
  prior.validate();
  Eigen::Vector4d d = start.vec() - prior.mean.vec();
  d[3] = wrap_pi(d[3]);
  return std::sqrt((d.array() / prior.sigma.array()).square().sum());
}

EndpointDistribution endpoint_infidelity_distribution(const std::vector<GateParams>& endpoints,
                                                      const ModelConfig& cfg) {
  const int n = int(endpoints.size());
  if (n < 20) throw std::invalid_argument("insufficient sample: need at least 20 endpoints");

  // per-axis mean over runs; the phase axis averages on the circle
  Eigen::Vector3d linear = Eigen::Vector3d::Zero();
  double sin_sum = 0.0, cos_sum = 0.0;
  for (const GateParams& e : endpoints) {
    linear += e.vec().head<3>();
    sin_sum += std::sin(e.phase_step);
    cos_sum += std::cos(e.phase_step);
  }
  linear /= n;
  const double phase_mean = std::atan2(sin_sum, cos_sum);

  const Eigen::Vector4d opt = optimal_params(cfg).vec();
  EndpointDistribution dist;
  dist.infidelities.resize(n);
  parallel_for(std::size_t(n), [&](std::size_t i) {
    Eigen::Vector4d v = opt;
    v.head<3>() += endpoints[i].vec().head<3>() - linear;
    v[3] += wrap_pi(endpoints[i].phase_step - phase_mean);
    dist.infidelities[Eigen::Index(i)] =
        miscalibration_infidelity(GateParams::from_vec(v), cfg);
  });

  Eigen::VectorXd sorted = dist.infidelities;
  std::sort(sorted.begin(), sorted.end());
  dist.median = (n % 2) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return dist;
}

GateParams model_frame_endpoint(const VirtualLab& lab, const ControlParams& control,
                                const ModelConfig& model) {
  const GateParams realized = lab.realized(control);
  const double s = control.gate_time / model.gate_time;
  return {realized.rabi * s, realized.centerline * s, realized.sideband * s,
          realized.phase_step};
}

bool within_capture_tolerance(const VirtualLab& lab, const ControlParams& control,
                              const ModelConfig& model, const StopThresholds& stop) {
  const GateParams mapped = model_frame_endpoint(lab, control, model);
  const GateParams opt = optimal_params(model);
  return std::abs(mapped.rabi - opt.rabi) < 2.0 * stop.rabi &&
         std::abs(mapped.centerline - opt.centerline) < 2.0 * stop.centerline &&
         std::abs(mapped.sideband - opt.sideband) < 2.0 * stop.sideband &&
         std::abs(wrap_pi(mapped.phase_step - opt.phase_step)) < 2.0 * stop.phase;
}

namespace {

// 95% Wilson score interval for a binomial fraction
void wilson_interval(int successes, int trials, double& low, double& high) {
  const double z = 1.959963984540054;
  const double n = trials, p = double(successes) / n;
  const double denom = 1.0 + z * z / n;
  const double center = (p + z * z / (2.0 * n)) / denom;
  const double margin = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
  low = std::max(0.0, center - margin);
  high = std::min(1.0, center + margin);
}

}  // namespace

std::vector<EndpointRun> collect_endpoint_runs(int runs, const CalibrationConfig& base,
                                               const GridStore& grids, const NoiseConfig& noise,
                                               bool confirm_runs, double max_distance,
                                               std::uint64_t seed, unsigned threads) {
  base.validate();
  if (runs < 1) throw std::invalid_argument("need at least one run");

  // the thresholded strategy's setting limits depend only on the menu and
  // model; derive them once here instead of once per run
  CalibrationConfig shared = base;
  if (shared.strategy == StrategyKind::kThresholded && !shared.setting_limits)
    shared.setting_limits = derive_setting_thresholds(shared.menu, shared.model, 120, threads);

  const double rabi_ref = rabi_opt(base.model);
  std::vector<EndpointRun> jobs(runs);
  RandomStream master(seed);
  for (EndpointRun& job : jobs) {
    Eigen::Vector4d draw;
    double dist;
    do {
      draw = base.prior.sigma.cwiseProduct(Eigen::Vector4d{
          master.gaussian(), master.gaussian(), master.gaussian(), master.gaussian()});
      dist = std::sqrt((draw.array() / base.prior.sigma.array()).square().sum());
    } while (max_distance > 0.0 && dist > max_distance);
    job.truth_offsets = draw;
    job.start_distance = dist;
    job.lab_seed = master.integer();
    job.run_seed = master.integer();
  }

  parallel_for(std::size_t(runs), [&](std::size_t i) {
    EndpointRun& job = jobs[i];
    HiddenTruth truth;
    truth.rabi_scale = 1.0 + job.truth_offsets[0] / rabi_ref;
    truth.stark_offset = job.truth_offsets[1];
    truth.mode_offset = job.truth_offsets[2];
    truth.phase_offset = job.truth_offsets[3];
    VirtualLab lab(base.model, truth, noise, job.lab_seed);

    CalibrationConfig cfg = shared;
    cfg.threads = 1;  // runs carry the parallelism
    job.record = run_calibration(lab, grids, cfg, job.run_seed);
    job.accepted = job.record.converged();
    if (job.accepted && confirm_runs)
      job.accepted = confirm(lab, job.record.final_control).accept;
    job.endpoint = model_frame_endpoint(lab, job.record.final_control, base.model);
  }, threads);
  return jobs;
}

GaussianPrior capture_study_prior(const ModelConfig& cfg) {
  GaussianPrior prior;
  prior.mean = optimal_params(cfg);
  prior.sigma << 0.2 * rabi_opt(cfg), two_pi * 1e3, two_pi * 1e3, 0.33 * pi;
  return prior;
}

CaptureReport capture_range_study(const std::vector<double>& distances,
                                  const std::vector<int>& particle_counts, int trials,
                                  const CalibrationConfig& base, const GridStore& grids,
                                  std::uint64_t seed, unsigned threads) {
  base.validate();
  if (trials < 1) throw std::invalid_argument("need at least one trial");
  for (double d : distances)
    if (!(d >= 0)) throw std::invalid_argument("distances must be >= 0");
  for (int np : particle_counts)
    if (np < 2) throw std::invalid_argument("particle counts must be >= 2");

  const StopThresholds stop = resolved_stop(base);
  const double rabi_ref = rabi_opt(base.model);

  CalibrationConfig shared = base;
  if (shared.strategy == StrategyKind::kThresholded && !shared.setting_limits)
    shared.setting_limits = derive_setting_thresholds(shared.menu, shared.model, 120, threads);

  // one set of start directions and lab seeds shared across particle counts,
  // so cells at the same distance face identical miscalibrations
  std::vector<Eigen::Vector3d> dirs(trials);
  std::vector<std::uint64_t> lab_seeds(trials), run_seeds(trials);
  RandomStream master(seed);
  for (int t = 0; t < trials; ++t) {
    Eigen::Vector3d u;
    do {
      u = {master.gaussian(), master.gaussian(), master.gaussian()};
    } while (u.norm() < 1e-9);
    dirs[t] = u.normalized();
    lab_seeds[t] = master.integer();
    run_seeds[t] = master.integer();
  }

  CaptureReport report;
  for (double d : distances) {
    for (int np : particle_counts) {
      CaptureCell cell;
      cell.distance = d;
      cell.particles = np;
      cell.trials = trials;
      std::vector<int> captured(trials, 0);
      parallel_for(std::size_t(trials), [&](std::size_t t) {
        const Eigen::Vector3d off = d * dirs[t].cwiseProduct(base.prior.sigma.head<3>());
        HiddenTruth truth;
        truth.rabi_scale = 1.0 + off[0] / rabi_ref;
        truth.stark_offset = off[1];
        truth.mode_offset = off[2];
        NoiseConfig noise;
        noise.depolarizing = base.depolarizing;
        VirtualLab lab(base.model, truth, noise, lab_seeds[t]);

        CalibrationConfig cfg = shared;
        cfg.particles = np;
        cfg.threads = 1;  // trials carry the parallelism
        const CalibrationRecord rec = run_calibration(lab, grids, cfg, run_seeds[t]);
        captured[t] = rec.converged() &&
                      within_capture_tolerance(lab, rec.final_control, base.model, stop);
      }, threads);
      cell.captured = std::accumulate(captured.begin(), captured.end(), 0);
      cell.fraction = double(cell.captured) / trials;
      wilson_interval(cell.captured, trials, cell.low, cell.high);
      report.cells.push_back(cell);
    }
  }
  return report;
}

std::optional<double> gaussian_peak_center(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                           const Eigen::VectorXd& sigma) {
  const Eigen::Index n = x.size();
  if (n < 3 || y.size() != n || sigma.size() != n)
    throw std::invalid_argument("need matching x, y, sigma with at least 3 points");

  // weighted log-parabola: ln y = a xi^2 + b xi + c on centered, scaled
  // abscissae; a Gaussian peak has a < 0 and center -b / (2a)
  const double x0 = x.mean();
  const double span = (x.maxCoeff() - x.minCoeff()) / 2.0;
  if (!(span > 0)) throw std::invalid_argument("scan points must not coincide");

  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double yi = std::max(y[i], 1e-6);
    const double w = (yi / sigma[i]) * (yi / sigma[i]);  // var(ln y) ~ (sigma / y)^2
    const double xi = (x[i] - x0) / span;
    const Eigen::Vector3d row{xi * xi, xi, 1.0};
    ata += w * row * row.transpose();
    atb += w * row * std::log(yi);
  }
  const Eigen::Vector3d coef = ata.ldlt().solve(atb);
  if (!coef.allFinite() || coef[0] >= 0.0) return std::nullopt;
  const double xi_star = -coef[1] / (2.0 * coef[0]);
  if (std::abs(xi_star) > 2.0) return std::nullopt;  // peak outside twice the window
  return x0 + span * xi_star;
}

namespace {

double clamp_p(double p, long n) { return std::clamp(p, 0.5 / n, 1.0 - 0.5 / n); }

struct ScanPoint {
  double y = 0.0;
  double sigma = 1.0;
};

ScanPoint transfer_peak(const ShotCounts& c) {
  const long n = c.total();
  const double p = clamp_p(double(c.ee) / n, n);
  return {p, std::sqrt(p * (1.0 - p) / n)};
}

ScanPoint closure_peak(const ShotCounts& c) {
  const long n = c.total();
  const double p = clamp_p(double(c.one) / n, n);
  return {1.0 - p, std::sqrt(p * (1.0 - p) / n)};
}

ScanPoint balance_peak(const ShotCounts& c) {
  const long n = c.total();
  const double pg = clamp_p(double(c.gg) / n, n);
  const double pe = clamp_p(double(c.ee) / n, n);
  // delta-method variance of 4 p_gg p_ee under multinomial counts
  const double var = 16.0 / n *
                     (pe * pe * pg * (1.0 - pg) + pg * pg * pe * (1.0 - pe) -
                      2.0 * pg * pg * pe * pe);
  return {4.0 * pg * pe, std::sqrt(std::max(var, 1e-12))};
}

}  // namespace

CalibrationRecord manual_baseline(VirtualLab& lab, const ModelConfig& model,
                                  const BaselineConfig& cfg) {
  if (cfg.shots_per_point < 1) throw std::invalid_argument("need at least one shot per point");
  if (!(cfg.sideband_window > 0) || !(cfg.centerline_window > 0) || !(cfg.time_fraction > 0) ||
      !(cfg.phase_window > 0))
    throw std::invalid_argument("scan windows must be > 0");

  ControlParams control = nominal_control(model);
  CalibrationRecord record;
  record.stop_reason = "schedule complete";
  const long shots_before = lab.shots_used();

  // One 4-point scan: measure, fit, retry once with a doubled window on a
  // failed fit, return the corrected knob value (unchanged when both fits
  // diverge).
  auto scan = [&](const MeasurementSetting& setting, double center, double window,
                  auto&& with_knob, auto&& observable) {
    ShotCounts accum{};
    auto attempt = [&](double w) -> std::optional<double> {
      Eigen::VectorXd xs = Eigen::VectorXd::LinSpaced(4, center - w, center + w);
      Eigen::VectorXd ys(4), sigmas(4);
      for (Eigen::Index i = 0; i < 4; ++i) {
        const ShotCounts c = lab.run_shots(with_knob(xs[i]), setting, cfg.shots_per_point);
        accum.gg += c.gg;
        accum.one += c.one;
        accum.ee += c.ee;
        const ScanPoint pt = observable(c);
        ys[i] = pt.y;
        sigmas[i] = pt.sigma;
      }
      std::optional<double> fit = gaussian_peak_center(xs, ys, sigmas);
      // a peak fitted beyond the scanned window is extrapolation, not a
      // measurement; count it as a failed fit so the scan widens
      if (fit && std::abs(*fit - center) > w) fit.reset();
      return fit;
    };
    std::optional<double> fit = attempt(window);
    if (!fit) fit = attempt(2.0 * window);
    const double knob = fit.value_or(center);
    record.iterations.push_back({setting, accum, GateParams{}, Eigen::Vector4d::Zero(), {}});
    return knob;
  };

  const MeasurementSetting single{1, 0.0};
  const MeasurementSetting doubled{2, 0.0};

  auto sideband_scan = [&](double window) {
    control.sideband_freq = scan(
        single, control.sideband_freq, window,
        [&](double x) { ControlParams c = control; c.sideband_freq = x; return c; },
        balance_peak);
    record.iterations.back().control = control;
  };
  auto centerline_scan = [&] {
    // doubled duration turns the entangler into a full population transfer,
    // whose contrast is first-order sensitive to the spin frequency
    control.centerline_freq = scan(
        single, control.centerline_freq, cfg.centerline_window,
        [&](double x) {
          ControlParams c = control;
          c.centerline_freq = x;
          c.gate_time = 2.0 * control.gate_time;
          return c;
        },
        transfer_peak);
    record.iterations.back().control = control;
  };
  auto time_scan = [&] {
    control.gate_time = scan(
        single, control.gate_time, cfg.time_fraction * control.gate_time,
        [&](double x) { ControlParams c = control; c.gate_time = x; return c; },
        closure_peak);
    record.iterations.back().control = control;
  };
  auto phase_scan = [&] {
    control.phase = wrap_pi(scan(
        doubled, control.phase, cfg.phase_window,
        [&](double x) { ControlParams c = control; c.phase = x; return c; },
        transfer_peak));
    record.iterations.back().control = control;
  };

  // coarse sideband; centerline; sideband and gate time twice over; final
  // sideband touch-up; centerline repeat; inter-gate phase
  sideband_scan(2.0 * cfg.sideband_window);
  centerline_scan();
  sideband_scan(cfg.sideband_window);
  time_scan();
  sideband_scan(cfg.sideband_window);
  time_scan();
  sideband_scan(cfg.sideband_window);
  centerline_scan();
  phase_scan();

  record.total_shots = lab.shots_used() - shots_before;
  record.final_control = control;
  return record;
}

}  // namespace mscal
