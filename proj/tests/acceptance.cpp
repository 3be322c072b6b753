// End-to-end verification of the calibration artifact at test-grid scale.
// Ten numbered checks cover the physics oracle, gate conditions, grid
// interpolation fidelity, the threshold-to-infidelity error budget,
// closed-loop convergence and residual quality, capture range, resampler
// moment preservation, the manual-baseline shot budget, and the
// confirmation gate.  Each check prints one PASS/FAIL line with its
// measured numbers; the process exits nonzero if any fail.
//
// Likelihood grids are built once into ./acceptance-grids and reused on
// later runs; the first run spends ~10 minutes there and ~30 minutes
// total on one core.

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "mscal/calibrator.hpp"
#include "mscal/config.hpp"
#include "mscal/evaluation.hpp"
#include "mscal/grid.hpp"
#include "mscal/parallel.hpp"
#include "mscal/particle_filter.hpp"
#include "mscal/physics.hpp"
#include "mscal/rng.hpp"
#include "mscal/virtual_lab.hpp"

namespace {

using namespace mscal;

int g_passed = 0;
int g_failed = 0;

void report(int id, bool ok, const char* fmt, ...) {
  std::printf("criterion %2d %s  ", id, ok ? "PASS" : "FAIL");
  va_list args;
  va_start(args, fmt);
  std::vprintf(fmt, args);
  va_end(args);
  std::printf("\n");
  std::fflush(stdout);
  ++(ok ? g_passed : g_failed);
}

// Fast configuration the grids, labs, and filters run in: constant pulse,
// truncation sized for the 7-gate corner of the test-scale ranges, and a
// coarse step whose integration bias is common to the grid and the lab.
ModelConfig fast_model() {
  ModelConfig cfg;
  cfg.n_max = 44;
  cfg.ramp_time = 0.0;
  cfg.integrator_step = 2.5e-7;
  return cfg;
}

// Default-step configuration for quantitative physics checks.
ModelConfig reference_model(int n_max) {
  ModelConfig cfg;
  cfg.n_max = n_max;
  cfg.ramp_time = 0.0;
  return cfg;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---- 1: closed form vs numerical propagation --------------------------------

void check_oracle() {
  ModelConfig cfg = reference_model(44);
  RandomStream rng(9001);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    GateParams th;
    th.rabi = (0.5 + rng.uniform()) * rabi_opt(cfg);
    th.centerline = 0.0;
    th.sideband = two_pi * (5e3 + 10e3 * rng.uniform());
    th.phase_step = (2.0 * rng.uniform() - 1.0) * pi;
    const OutcomeDistribution num =
        propagate_sequence(th, cfg, {1, 0.0}).outcome_probabilities();
    SpinMotionState closed;
    closed.amps = analytic_evolution(th, cfg, cfg.gate_time).unitary * ground_state(cfg).amps;
    closed.n_max = cfg.n_max;
    const OutcomeDistribution ana = closed.outcome_probabilities();
    for (double d : {num.p_gg - ana.p_gg, num.p_one - ana.p_one, num.p_ee - ana.p_ee})
      worst = std::max(worst, std::abs(d));
  }
  report(1, worst <= 1e-6, "closed-form outcome discrepancy %.2e over 100 points (limit 1e-6)",
         worst);
}

// ---- 2: gate conditions at the nominal optimum ------------------------------

void check_gate_conditions() {
  ModelConfig flat = reference_model(16);
  const GateParams opt = optimal_params(flat);
  const OutcomeDistribution one = outcome_probabilities(opt, flat, {1, 0.0});
  const OutcomeDistribution two = outcome_probabilities(opt, flat, {2, 0.0});
  const double flat_err = std::max({std::abs(one.p_gg - 0.5), one.p_one,
                                    std::abs(one.p_ee - 0.5), 1.0 - two.p_ee});

  ModelConfig shaped;  // default ramped pulse with the rescaled coupling
  const GateParams sopt = optimal_params(shaped);
  const OutcomeDistribution sone = outcome_probabilities(sopt, shaped, {1, 0.0});
  const OutcomeDistribution stwo = outcome_probabilities(sopt, shaped, {2, 0.0});
  const double shaped_err = std::max({std::abs(sone.p_gg - 0.5), sone.p_one,
                                      std::abs(sone.p_ee - 0.5), 1.0 - stwo.p_ee});

  report(2, flat_err <= 1e-6 && shaped_err <= 1e-2,
         "gate-condition error %.2e constant (limit 1e-6), %.2e shaped (limit 1e-2)", flat_err,
         shaped_err);
}

// ---- grid cache -------------------------------------------------------------

GridStore build_or_load_grids(const ModelConfig& cfg, const SettingMenu& menu) {
  const std::filesystem::path dir = "acceptance-grids";
  std::filesystem::create_directories(dir);
  GridStore store(cfg);
  for (const MeasurementSetting& s : menu.all()) {
    const std::filesystem::path path = dir / grid_filename(s);
    bool loaded = false;
    if (std::filesystem::exists(path)) {
      try {
        store.add(load_grid(path));
        loaded = true;
      } catch (const std::exception& e) {
        std::printf("  (rebuilding %s: %s)\n", path.string().c_str(), e.what());
      }
    }
    if (!loaded) {
      GridTable table = build_grid(test_scale_grid_spec(s, cfg), cfg);
      save_grid(table, path);
      store.add(std::move(table));
    }
  }
  return store;
}

// ---- 3: interpolation against direct integration ----------------------------

void check_grid_fidelity(const GridStore& grids, const ModelConfig& cfg) {
  const MeasurementSetting setting{1, 0.0};  // single-gate likelihood grid
  const GridSpec spec = test_scale_grid_spec(setting, cfg);
  const SettingLikelihood like = grids.likelihood(cfg.gate_time);
  const double w0 = rabi_opt(cfg);

  const int queries = 1000;
  RandomStream rng(9003);
  std::vector<GateParams> points(queries);
  for (int i = 0; i < queries; ++i) {
    Eigen::Vector4d v;
    // interior draw: keep away from the outermost half step of each axis
    for (int a = 0; a < 4; ++a) {
      const GridAxis& ax = spec.axes[a];
      const double half = 0.5 * (ax.max - ax.min) / (ax.count - 1);
      v[a] = ax.min + half + (ax.max - ax.min - 2 * half) * rng.uniform();
    }
    v[0] *= w0;  // grid axis 0 is relative to the nominal optimum
    points[i] = GateParams::from_vec(v);
  }

  std::vector<double> err_gg(queries), err_one(queries), err_ee(queries);
  parallel_for(queries, [&](std::size_t i) {
    const OutcomeDistribution direct = outcome_probabilities(points[i], cfg, setting);
    const OutcomeDistribution interp = like(setting, points[i]).value();
    err_gg[i] = std::abs(direct.p_gg - interp.p_gg);
    err_one[i] = std::abs(direct.p_one - interp.p_one);
    err_ee[i] = std::abs(direct.p_ee - interp.p_ee);
  });

  double worst = 0.0, mean_worst = 0.0;
  for (const auto* e : {&err_gg, &err_one, &err_ee}) {
    worst = std::max(worst, *std::max_element(e->begin(), e->end()));
    double m = 0.0;
    for (double v : *e) m += v;
    mean_worst = std::max(mean_worst, m / queries);
  }
  report(3, worst <= 5e-3 && mean_worst <= 1e-3,
         "interpolation error over 1000 queries: max %.2e (limit 5e-3), mean %.2e (limit 1e-3)",
         worst, mean_worst);
}

// ---- 4: stop thresholds map onto the target infidelity budget ---------------

void check_threshold_budget() {
  ModelConfig cfg = reference_model(16);
  const GateParams opt = optimal_params(cfg);
  const StopThresholds stop = StopThresholds::standard(rabi_opt(cfg));
  double lo = 1.0, hi = 0.0;
  for (int a = 0; a < 4; ++a) {
    Eigen::Vector4d v = opt.vec();
    v[a] += stop.vec()[a];
    const double infid = miscalibration_infidelity(GateParams::from_vec(v), cfg);
    lo = std::min(lo, infid);
    hi = std::max(hi, infid);
  }
  report(4, lo >= 1e-3 && hi <= 4e-3,
         "per-axis infidelity at the stop thresholds in [%.2e, %.2e] (band [1e-3, 4e-3])", lo,
         hi);
}

// ---- 5/6/9: closed-loop convergence, residual quality, shot budget ----------

struct StrategyStats {
  int converged = 0;
  double median_shots = 0.0;
  std::vector<GateParams> endpoints;  // model frame, converged runs only
};

StrategyStats run_strategy_batch(StrategyKind kind, const GridStore& grids,
                                 const ModelConfig& cfg, std::uint64_t seed) {
  CalibrationConfig base;
  base.model = cfg;
  base.prior = standard_prior(cfg);
  base.particles = 10000;
  base.strategy = kind;
  NoiseConfig noise;  // 1% depolarizing, zero drift
  const auto runs = collect_endpoint_runs(50, base, grids, noise, false, 1.0, seed);

  StrategyStats stats;
  std::vector<double> shots;
  for (const EndpointRun& r : runs) {
    shots.push_back(double(r.record.total_shots));
    if (r.record.converged()) {
      ++stats.converged;
      stats.endpoints.push_back(r.endpoint);
    }
  }
  stats.median_shots = median_of(shots);
  return stats;
}

void check_convergence(const StrategyStats& vmin, const StrategyStats& thresh) {
  const bool ok = vmin.converged >= 45 && thresh.converged >= 45 &&
                  vmin.median_shots >= 700 && vmin.median_shots <= 1700 &&
                  thresh.median_shots >= 700 && thresh.median_shots <= 1700;
  report(5, ok,
         "50-run batches: variance-min %d/50 converged, median %.0f shots; "
         "thresholded %d/50, median %.0f (need >= 45 and [700, 1700])",
         vmin.converged, vmin.median_shots, thresh.converged, thresh.median_shots);
}

void check_residual_quality(const StrategyStats& vmin, const StrategyStats& thresh) {
  ModelConfig eval = reference_model(16);

  std::vector<GateParams> endpoints = vmin.endpoints;
  endpoints.insert(endpoints.end(), thresh.endpoints.begin(), thresh.endpoints.end());
  const double measured = endpoint_infidelity_distribution(endpoints, eval).median;

  // scatter at exactly the stop widths: the error budget the thresholds buy
  const StopThresholds stop = StopThresholds::standard(rabi_opt(eval));
  RandomStream rng(9006);
  std::vector<GateParams> synthetic(400);
  for (auto& th : synthetic) {
    Eigen::Vector4d v = optimal_params(eval).vec();
    for (int a = 0; a < 4; ++a) v[a] += stop.vec()[a] * rng.gaussian();
    th = GateParams::from_vec(v);
  }
  const double synth = endpoint_infidelity_distribution(synthetic, eval).median;

  const bool ok = measured <= 3e-3 && synth >= 2.5e-3 && synth <= 1e-2;
  report(6, ok,
         "median endpoint infidelity %.2e over %zu accepted runs (limit 3e-3); "
         "threshold-width synthetic median %.2e (band [2.5e-3, 1e-2])",
         measured, endpoints.size(), synth);
}

// ---- 7: capture range vs particle count -------------------------------------

void check_capture(const GridStore& grids, const ModelConfig& cfg) {
  CalibrationConfig base;
  base.model = cfg;
  base.prior = capture_study_prior(cfg);
  base.strategy = StrategyKind::kVarianceMin;
  const CaptureReport rep = capture_range_study({1.0}, {10000, 500}, 30, base, grids, 9007);
  const CaptureCell& big = rep.cells[0];
  const CaptureCell& small = rep.cells[1];
  report(7, big.fraction >= 0.9 && small.fraction < big.fraction,
         "capture at unit start distance: %d/%d with 10000 particles (need >= 0.9), "
         "%d/%d with 500 (must be lower)",
         big.captured, big.trials, small.captured, small.trials);
}

// ---- 8: resampler preserves posterior moments -------------------------------

void check_resampler_moments() {
  ModelConfig cfg = fast_model();
  GaussianPrior prior = standard_prior(cfg);
  const int trials = 100;
  Eigen::MatrixXd dmean(trials, 4), dvar(trials, 4);
  for (int t = 0; t < trials; ++t) {
    ParticleFilter pf(prior, 10000, 9100 + std::uint64_t(t));
    // weight the cloud with a smooth non-uniform likelihood before resampling
    pf.update({30, 40, 30}, [&](const GateParams& th) {
      const double z = (th.rabi - prior.mean.rabi) / prior.sigma[0];
      const double q = 1.0 / (1.0 + std::exp(-z));
      return OutcomeDistribution{q, (1.0 - q) / 2, (1.0 - q) / 2};
    });
    const FilterEstimate before = pf.estimates();
    pf.resample(0.98);
    const FilterEstimate after = pf.estimates();
    dmean.row(t) = (after.mean.vec() - before.mean.vec()).transpose();
    dvar.row(t) = (after.variance - before.variance).transpose();
  }
  double worst_pull = 0.0;
  for (int d = 0; d < 4; ++d) {
    for (Eigen::MatrixXd* diffs : {&dmean, &dvar}) {
      const Eigen::ArrayXd col = diffs->col(d).array();
      const double m = col.mean();
      const double se =
          std::sqrt((col - m).square().sum() / (trials - 1.0)) / std::sqrt(double(trials));
      worst_pull = std::max(worst_pull, std::abs(m) / std::max(se, 1e-300));
    }
  }
  report(8, worst_pull <= 3.0,
         "moment drift over 100 resamples: worst pull %.2f standard errors (limit 3)",
         worst_pull);
}

// ---- 9: manual baseline cost vs the adaptive loop ---------------------------

void check_shot_budget(const StrategyStats& vmin, const StrategyStats& thresh,
                       const ModelConfig& cfg) {
  HiddenTruth truth;  // clean: offsets zero
  NoiseConfig noise;  // 1% depolarizing, zero drift
  VirtualLab lab(cfg, truth, noise, 9009);
  const CalibrationRecord rec = manual_baseline(lab, cfg);
  const double bayes = std::min(vmin.median_shots, thresh.median_shots);
  report(9, rec.total_shots == 1800 && bayes <= 1260,
         "manual baseline %ld shots (must be exactly 1800); best adaptive median %.0f "
         "(limit 1260 = 0.7 x 1800)",
         rec.total_shots, bayes);
}

// ---- 10: confirmation gate --------------------------------------------------

void check_confirmation(const ModelConfig& cfg) {
  const ControlParams control = nominal_control(cfg);
  NoiseConfig noise;
  int good_accepts = 0, bad_rejects = 0;
  for (int t = 0; t < 200; ++t) {
    HiddenTruth clean;
    VirtualLab lab(cfg, clean, noise, 9200 + std::uint64_t(t));
    good_accepts += confirm(lab, control).accept ? 1 : 0;

    HiddenTruth misset;
    misset.rabi_scale = 1.1;
    VirtualLab bad(cfg, misset, noise, 9400 + std::uint64_t(t));
    bad_rejects += confirm(bad, control).accept ? 0 : 1;
  }
  report(10, good_accepts >= 198 && bad_rejects >= 198,
         "confirmation over 200 trials: %d/200 accepts when calibrated, %d/200 rejects "
         "at 10%% coupling error (need >= 198 each)",
         good_accepts, bad_rejects);
}

}  // namespace

int main() {
  const ModelConfig cfg = fast_model();

  check_oracle();
  check_gate_conditions();

  std::printf("building/loading test-scale grids...\n");
  std::fflush(stdout);
  const GridStore grids = build_or_load_grids(cfg, SettingMenu::standard());

  check_grid_fidelity(grids, cfg);
  check_threshold_budget();

  std::printf("running 50-calibration batches per strategy...\n");
  std::fflush(stdout);
  const StrategyStats vmin = run_strategy_batch(StrategyKind::kVarianceMin, grids, cfg, 9005);
  const StrategyStats thresh = run_strategy_batch(StrategyKind::kThresholded, grids, cfg, 9015);

  check_convergence(vmin, thresh);
  check_residual_quality(vmin, thresh);
  check_capture(grids, cfg);
  check_resampler_moments();
  check_shot_budget(vmin, thresh, cfg);
  check_confirmation(cfg);

  std::printf("acceptance: %d/%d passed\n", g_passed, g_passed + g_failed);
  return g_failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
