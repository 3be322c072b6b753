#include "mscal/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string_view>

#include "mscal/parallel.hpp"
#include "mscal/physics.hpp"

namespace mscal {

SettingMenu SettingMenu::standard() {
  SettingMenu menu;
  menu.rabi_sensitive = {{1, 0.0}, {3, 0.0}, {5, 0.0}, {7, 0.0}};
  menu.phase_sensitive = {{2, pi / 4}, {4, pi / 4}, {6, pi / 4}};
  return menu;
}

std::vector<MeasurementSetting> SettingMenu::all() const {
  std::vector<MeasurementSetting> out = rabi_sensitive;
  out.insert(out.end(), phase_sensitive.begin(), phase_sensitive.end());
  return out;
}

void SettingMenu::validate() const {
  bool fallback = false;
  for (const auto& s : rabi_sensitive) {
    if (s.n_gates < 1) throw std::invalid_argument("menu setting needs at least one gate");
    if (s.phase_target != 0.0)
      throw std::invalid_argument("rabi-sensitive settings must keep the phase fixed");
    fallback |= s.n_gates == 1;
  }
  for (const auto& s : phase_sensitive) {
    if (s.n_gates < 2) throw std::invalid_argument("phase-stepped settings need two gates");
    if (s.phase_target == 0.0)
      throw std::invalid_argument("phase-sensitive settings must step the phase");
  }
  if (!fallback) throw std::invalid_argument("menu must contain the single-gate fallback");
}

void StopThresholds::validate() const {
  if (!(rabi > 0 && centerline > 0 && sideband > 0 && phase > 0))
    throw std::invalid_argument("stop thresholds must be positive");
}

const Eigen::Vector4d* SettingThresholds::find(const MeasurementSetting& s) const {
  for (const auto& [setting, limit] : limits)
    if (setting == s) return &limit;
  return nullptr;
}

Eigen::Vector4d expected_posterior_variance(const ParticleFilter& filter,
                                            const MeasurementSetting& setting,
                                            const SettingLikelihood& likelihood,
                                            double depolarizing, unsigned threads) {
  const int n = filter.count();
  Eigen::Matrix3Xd q(3, n);
  parallel_for(
      std::size_t(n),
      [&](std::size_t i) {
        const auto p = likelihood(setting, filter.particle(int(i)));
        if (p) {
          q(0, i) = (1.0 - depolarizing) * p->p_gg + depolarizing * 0.25;
          q(1, i) = (1.0 - depolarizing) * p->p_one + depolarizing * 0.5;
          q(2, i) = (1.0 - depolarizing) * p->p_ee + depolarizing * 0.25;
        } else {
          q.col(i) = Eigen::Vector3d(0.25, 0.5, 0.25);
        }
      },
      threads);

  Eigen::Vector4d expected = Eigen::Vector4d::Zero();
  for (int m = 0; m < 3; ++m) {
    const Eigen::VectorXd pw = filter.weights().cwiseProduct(q.row(m).transpose());
    const double class_prob = pw.sum();
    if (class_prob <= 0.0) continue;  // outcome can never occur
    expected += class_prob * weighted_moments(filter.thetas(), pw).variance;
  }
  return expected;
}

double score_setting(const Eigen::Vector4d& expected_variance, const StopThresholds& stop) {
  stop.validate();
  return (expected_variance.array() / stop.vec().array().square()).sum();
}

MeasurementSetting select_variance_min(const ParticleFilter& filter, const SettingMenu& menu,
                                       const StopThresholds& stop,
                                       const SettingLikelihood& likelihood, double depolarizing,
                                       unsigned threads) {
  menu.validate();
  const std::vector<MeasurementSetting> candidates = menu.all();
  MeasurementSetting best = candidates.front();
  double best_score = 0.0;
  bool first = true;
  for (const MeasurementSetting& s : candidates) {
    const double score =
        score_setting(expected_posterior_variance(filter, s, likelihood, depolarizing, threads),
                      stop);
    const bool wins =
        first || score < best_score ||
        (score == best_score &&
         (s.n_gates < best.n_gates ||
          (s.n_gates == best.n_gates && s.phase_target == 0.0 && best.phase_target != 0.0)));
    if (wins) {
      best = s;
      best_score = score;
      first = false;
    }
  }
  return best;
}

namespace {

// The scan corners (multi-gate phase-stepped sequences far off the loop-closure
// detuning) swing the motional excursion well past any economical fixed cutoff,
// so grow the truncation where the leakage guard fires instead of paying the
// worst-case cost at every point.
double ground_return(const GateParams& theta, ModelConfig cfg, const MeasurementSetting& s) {
  for (;;) {
    try {
      return outcome_probabilities(theta, cfg, s).p_gg;
    } catch (const std::runtime_error& e) {
      if (cfg.n_max >= 96 || std::string_view(e.what()) != "truncation too small") throw;
      cfg.n_max = std::min(96, cfg.n_max + (cfg.n_max + 1) / 2);
    }
  }
}

// distance from the optimum to the nearest non-central local extremum of the
// ground-return probability along +-direction of coordinate d
double scan_extremum(const MeasurementSetting& setting, const ModelConfig& cfg,
                     const GateParams& opt, int d, double sign, double range, int points) {
  const double h = range / points;
  auto eval = [&](int k) {
    Eigen::Vector4d v = opt.vec();
    v[d] += sign * k * h;
    return ground_return(GateParams::from_vec(v), cfg, setting);
  };
  double cur = eval(1);
  double left = cur - eval(0);
  for (int k = 1; k + 1 <= points; ++k) {
    const double next = eval(k + 1);
    const double right = next - cur;
    if (std::abs(left) >= 1e-12 && std::abs(right) >= 1e-12 && left * right < 0.0) return k * h;
    if (std::abs(right) >= 1e-12) left = right;  // carry the slope across plateaus
    cur = next;
  }
  return range;
}

}  // namespace

SettingThresholds derive_setting_thresholds(const SettingMenu& menu, const ModelConfig& cfg,
                                            int points_per_side, unsigned threads) {
  menu.validate();
  cfg.validate();
  if (points_per_side < 8) throw std::invalid_argument("scan needs at least 8 points per side");

  const GateParams opt = optimal_params(cfg);
  // scan half-widths follow the production multi-gate grid
  const Eigen::Vector4d range{0.5 * opt.rabi, two_pi * 3.5e3, two_pi * 5.0e3, pi};

  std::vector<MeasurementSetting> settings;
  for (const auto& s : menu.all())
    if (s.n_gates > 1) settings.push_back(s);  // the single-gate fallback has no limits

  // flatten (setting, parameter, direction) for the parallel sweep
  std::vector<double> dist(settings.size() * 8);
  parallel_for(
      dist.size(),
      [&](std::size_t j) {
        const std::size_t s = j / 8;
        const int d = int((j % 8) / 2);
        const double sign = (j % 2 == 0) ? 1.0 : -1.0;
        dist[j] = scan_extremum(settings[s], cfg, opt, d, sign, range[d], points_per_side);
      },
      threads);

  SettingThresholds out;
  for (std::size_t s = 0; s < settings.size(); ++s) {
    Eigen::Vector4d limit;
    for (int d = 0; d < 4; ++d) limit[d] = std::min(dist[s * 8 + 2 * d], dist[s * 8 + 2 * d + 1]);
    out.limits.emplace_back(settings[s], limit);
  }
  return out;
}

MeasurementSetting select_thresholded(const ParticleFilter& filter, const SettingMenu& menu,
                                      const SettingThresholds& thresholds, long parity) {
  menu.validate();
  const Eigen::Vector4d sigma = filter.estimates().variance.cwiseSqrt();
  const std::vector<MeasurementSetting>& cls =
      parity % 2 == 0 ? menu.rabi_sensitive : menu.phase_sensitive;

  const MeasurementSetting* best = nullptr;
  for (const MeasurementSetting& s : cls) {
    const Eigen::Vector4d* limit = thresholds.find(s);
    if (limit && (sigma.array() > limit->array()).any()) continue;
    if (!best || s.n_gates > best->n_gates) best = &s;
  }
  if (best) return *best;
  for (const MeasurementSetting& s : menu.rabi_sensitive)
    if (s.n_gates == 1) return s;
  throw std::logic_error("menu lost its single-gate fallback");  // validate() prevents this
}

bool should_stop(const ParticleFilter& filter, const StopThresholds& stop) {
  stop.validate();
  const Eigen::Vector4d sigma = filter.estimates().variance.cwiseSqrt();
  return (sigma.array() < stop.vec().array()).all();
}

}  // namespace mscal
