#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "mscal/physics.hpp"
#include "mscal/strategy.hpp"

using namespace mscal;

namespace {

GaussianPrior wide_prior() {
  GaussianPrior prior;
  prior.mean = GateParams{10.0, 0.0, 5.0, 0.0};
  prior.sigma << 1.0, 0.5, 2.0, 0.3;
  return prior;
}

// logistic single-class response on the rabi coordinate with tunable slope
SettingLikelihood rabi_logistic(std::map<int, double> slope_by_gates) {
  return [slopes = std::move(slope_by_gates)](const MeasurementSetting& s, const GateParams& th)
             -> std::optional<OutcomeDistribution> {
    const double k = slopes.count(s.n_gates) ? slopes.at(s.n_gates) : 1.0;
    const double q = 1.0 / (1.0 + std::exp(-k * (th.rabi - 10.0)));
    return OutcomeDistribution{q, (1.0 - q) / 2, (1.0 - q) / 2};
  };
}

}  // namespace

TEST_CASE("menu composition and validation") {
  SettingMenu menu = SettingMenu::standard();
  REQUIRE(menu.rabi_sensitive.size() == 4);
  REQUIRE(menu.phase_sensitive.size() == 3);
  CHECK(menu.rabi_sensitive[0] == MeasurementSetting{1, 0.0});
  CHECK(menu.rabi_sensitive[3] == MeasurementSetting{7, 0.0});
  CHECK(menu.phase_sensitive[0] == MeasurementSetting{2, pi / 4});
  CHECK(menu.phase_sensitive[2] == MeasurementSetting{6, pi / 4});
  CHECK(menu.all().size() == 7);
  menu.validate();

  SettingMenu no_fallback = menu;
  no_fallback.rabi_sensitive.erase(no_fallback.rabi_sensitive.begin());
  CHECK_THROWS_AS(no_fallback.validate(), std::invalid_argument);

  SettingMenu bad_class = menu;
  bad_class.rabi_sensitive[1].phase_target = 0.1;
  CHECK_THROWS_AS(bad_class.validate(), std::invalid_argument);
}

TEST_CASE("stop thresholds and scores") {
  StopThresholds stop = StopThresholds::standard(1000.0);
  CHECK(stop.rabi == doctest::Approx(20.0));
  CHECK(stop.centerline == doctest::Approx(150.0 * two_pi));
  CHECK(stop.sideband == doctest::Approx(200.0 * two_pi));
  CHECK(stop.phase == doctest::Approx(0.028 * pi));
  stop.validate();

  Eigen::Vector4d at_threshold = stop.vec().array().square();
  CHECK(score_setting(at_threshold, stop) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(score_setting(Eigen::Vector4d::Zero(), stop) == 0.0);
  Eigen::Vector4d lopsided = Eigen::Vector4d::Zero();
  lopsided[0] = 4.0 * stop.rabi * stop.rabi;
  CHECK(score_setting(lopsided, stop) == doctest::Approx(4.0).epsilon(1e-12));

  StopThresholds invalid = stop;
  invalid.sideband = 0.0;
  CHECK_THROWS_AS(invalid.validate(), std::invalid_argument);
}

TEST_CASE("expected posterior variance") {
  SUBCASE("delta posterior stays a delta") {
    GaussianPrior prior = wide_prior();
    prior.sigma.setConstant(1e-300);
    ParticleFilter pf(prior, 200, 3);
    Eigen::Vector4d ev = expected_posterior_variance(
        pf, {3, 0.0}, rabi_logistic({}));
    // only mean-roundoff scatter survives a degenerate ensemble
    CHECK(ev.maxCoeff() < 1e-25);
  }

  SUBCASE("matches scalar brute force over the three outcomes") {
    GaussianPrior prior = wide_prior();
    ParticleFilter pf(prior, 3, 5);
    // explicit per-particle likelihood table keyed by particle identity
    const Eigen::Matrix4Xd& th = pf.thetas();
    auto row_of = [&](const GateParams& g) {
      for (int i = 0; i < 3; ++i)
        if (g.rabi == th(0, i)) return i;
      return -1;
    };
    const double table[3][3] = {{0.7, 0.2, 0.1}, {0.3, 0.3, 0.4}, {0.1, 0.6, 0.3}};
    SettingLikelihood lk = [&](const MeasurementSetting&,
                               const GateParams& g) -> std::optional<OutcomeDistribution> {
      const int i = row_of(g);
      REQUIRE(i >= 0);
      return OutcomeDistribution{table[i][0], table[i][1], table[i][2]};
    };
    const double depol = 0.01;
    Eigen::Vector4d got = expected_posterior_variance(pf, {2, pi / 4}, lk, depol, 1);

    // plain scalar re-derivation; the phase coordinate takes the circular
    // mean, matching the posterior-moment definition
    const double w[3] = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    const double u[3] = {0.25, 0.5, 0.25};
    for (int d = 0; d < 4; ++d) {
      double expected = 0.0;
      for (int m = 0; m < 3; ++m) {
        double pw[3], z = 0.0;
        for (int i = 0; i < 3; ++i) {
          const double q = (1.0 - depol) * table[i][m] + depol * u[m];
          z += pw[i] = w[i] * q;
        }
        double mean = 0.0;
        if (d < 3) {
          for (int i = 0; i < 3; ++i) mean += pw[i] / z * th(d, i);
        } else {
          double s = 0.0, c = 0.0;
          for (int i = 0; i < 3; ++i) {
            s += pw[i] * std::sin(th(d, i));
            c += pw[i] * std::cos(th(d, i));
          }
          mean = std::atan2(s, c);
        }
        double var = 0.0;
        for (int i = 0; i < 3; ++i) {
          const double dev = d < 3 ? th(d, i) - mean : wrap_pi(th(d, i) - mean);
          var += pw[i] / z * dev * dev;
        }
        expected += z * var;
      }
      CHECK(got[d] == doctest::Approx(expected).epsilon(1e-10));
    }
  }

  SUBCASE("never above the current variance (law of total variance)") {
    ParticleFilter pf(wide_prior(), 5000, 8);
    pf.update({55, 25, 20}, [](const GateParams& th) {
      const double q = 0.5 + 0.3 * std::tanh(0.8 * (th.sideband - 5.0));
      return OutcomeDistribution{q, (1.0 - q) / 2, (1.0 - q) / 2};
    });
    const Eigen::Vector4d now = pf.estimates().variance;
    for (const auto& s : SettingMenu::standard().all()) {
      Eigen::Vector4d ev = expected_posterior_variance(pf, s, rabi_logistic({{3, 2.0}}));
      for (int d = 0; d < 4; ++d) CHECK(ev[d] <= now[d] * (1.0 + 1e-9) + 1e-15);
    }
  }

  SUBCASE("uninformative axis keeps its variance") {
    // likelihood blind to the phase coordinate on an independent ensemble
    ParticleFilter pf(wide_prior(), 20000, 13);
    Eigen::Vector4d ev = expected_posterior_variance(pf, {1, 0.0}, rabi_logistic({{1, 1.5}}));
    const Eigen::Vector4d now = pf.estimates().variance;
    CHECK(ev[3] == doctest::Approx(now[3]).epsilon(0.02));
    CHECK(ev[0] < 0.9 * now[0]);  // while the informative axis does shrink
  }
}

TEST_CASE("variance-minimizing selection") {
  ParticleFilter pf(wide_prior(), 2000, 21);
  StopThresholds stop = StopThresholds::standard(10.0);
  stop.centerline = 0.5;
  stop.sideband = 2.0;
  stop.phase = 0.3;

  SUBCASE("menu of one returns it") {
    SettingMenu solo;
    solo.rabi_sensitive = {{1, 0.0}};
    CHECK(select_variance_min(pf, solo, stop, rabi_logistic({})) ==
          MeasurementSetting{1, 0.0});
  }

  SUBCASE("most informative setting wins") {
    SettingLikelihood lk = rabi_logistic({{1, 0.1}, {3, 5.0}, {5, 0.5}, {7, 0.5},
                                          {2, 0.2}, {4, 0.2}, {6, 0.2}});
    CHECK(select_variance_min(pf, SettingMenu::standard(), stop, lk) ==
          MeasurementSetting{3, 0.0});
  }

  SUBCASE("ties break toward fewer gates, then fixed phase") {
    // identical information content for every setting
    SettingLikelihood flat = rabi_logistic({});
    CHECK(select_variance_min(pf, SettingMenu::standard(), stop, flat) ==
          MeasurementSetting{1, 0.0});

    // single gate made useless; 5-gate and 2-gate tie -> 2 gates win
    SettingMenu menu;
    menu.rabi_sensitive = {{1, 0.0}, {5, 0.0}};
    menu.phase_sensitive = {{2, pi / 4}};
    SettingLikelihood keyed = [](const MeasurementSetting& s, const GateParams& th)
        -> std::optional<OutcomeDistribution> {
      if (s.n_gates == 1) return OutcomeDistribution{0.5, 0.25, 0.25};
      const double q = 1.0 / (1.0 + std::exp(-(th.rabi - 10.0)));
      return OutcomeDistribution{q, (1.0 - q) / 2, (1.0 - q) / 2};
    };
    CHECK(select_variance_min(pf, menu, stop, keyed) == MeasurementSetting{2, pi / 4});
  }

  SUBCASE("scale invariance of the argmin") {
    SettingLikelihood lk = rabi_logistic({{1, 0.1}, {3, 5.0}, {5, 0.7}});
    StopThresholds scaled = stop;
    scaled.rabi *= 7.5;
    scaled.centerline *= 7.5;
    scaled.sideband *= 7.5;
    scaled.phase *= 7.5;
    CHECK(select_variance_min(pf, SettingMenu::standard(), stop, lk) ==
          select_variance_min(pf, SettingMenu::standard(), scaled, lk));
  }
}

TEST_CASE("setting thresholds from 1-D response scans") {
  ModelConfig cfg;
  cfg.lamb_dicke = 0.05;
  cfg.n_max = 16;
  cfg.gate_time = 100e-6;
  cfg.ramp_time = 0.0;
  cfg.integrator_step = cfg.gate_time / 500;

  SettingMenu menu;
  menu.rabi_sensitive = {{1, 0.0}, {3, 0.0}, {5, 0.0}};
  menu.phase_sensitive = {{2, pi / 4}, {4, pi / 4}};

  SettingThresholds th = derive_setting_thresholds(menu, cfg, 100);
  CHECK(th.find({1, 0.0}) == nullptr);  // fallback carries no limits
  REQUIRE(th.find({3, 0.0}) != nullptr);
  REQUIRE(th.find({5, 0.0}) != nullptr);
  REQUIRE(th.find({2, pi / 4}) != nullptr);
  REQUIRE(th.find({4, pi / 4}) != nullptr);

  const double rabi_ref = rabi_opt(cfg);
  // ground return of N fixed-phase gates is cos^2(N (pi/2) u^2) in
  // u = rabi/optimum: nearest extrema sit at u^2 = 2k/N
  const double t3 = (*th.find({3, 0.0}))[0];
  CHECK(t3 == doctest::Approx((std::sqrt(4.0 / 3.0) - 1.0) * rabi_ref).epsilon(0.08));
  const double t5 = (*th.find({5, 0.0}))[0];
  CHECK(t5 == doctest::Approx((std::sqrt(6.0 / 5.0) - 1.0) * rabi_ref).epsilon(0.08));
  CHECK(t5 < t3);  // more gates, tighter admissible prior

  const double p2 = (*th.find({2, pi / 4}))[3];
  const double p4 = (*th.find({4, pi / 4}))[3];
  CHECK(p2 > 0.0);
  CHECK(p4 > 0.0);
  CHECK(p4 < p2);

  for (const auto& [setting, limit] : th.limits) {
    CHECK(limit.minCoeff() > 0.0);
    CHECK(limit[0] <= 0.5 * rabi_ref);
    CHECK(limit[3] <= pi);
  }
}

TEST_CASE("thresholded selection") {
  GaussianPrior prior;
  prior.mean = GateParams{10.0, 0.0, 5.0, 0.0};
  prior.sigma << 2.0, 15.0, 15.0, 0.6;
  ParticleFilter pf(prior, 20000, 31);

  SettingMenu menu;
  menu.rabi_sensitive = {{1, 0.0}, {3, 0.0}, {5, 0.0}};
  menu.phase_sensitive = {{2, pi / 4}, {4, pi / 4}};

  SettingThresholds th;
  th.limits = {
      {{3, 0.0}, Eigen::Vector4d{3.0, 30.0, 30.0, 1.0}},
      {{5, 0.0}, Eigen::Vector4d{1.0, 10.0, 10.0, 0.5}},
      {{2, pi / 4}, Eigen::Vector4d{2.5, 25.0, 25.0, 0.9}},
      {{4, pi / 4}, Eigen::Vector4d{2.5, 25.0, 25.0, 0.3}},
  };

  CHECK(select_thresholded(pf, menu, th, 0) == MeasurementSetting{3, 0.0});
  CHECK(select_thresholded(pf, menu, th, 1) == MeasurementSetting{2, pi / 4});
  CHECK(select_thresholded(pf, menu, th, 2) == MeasurementSetting{3, 0.0});

  // a filter too wide for every limited setting falls back to one gate
  GaussianPrior broad = prior;
  broad.sigma *= 100.0;
  ParticleFilter wide(broad, 20000, 32);
  CHECK(select_thresholded(wide, menu, th, 0) == MeasurementSetting{1, 0.0});
  CHECK(select_thresholded(wide, menu, th, 1) == MeasurementSetting{1, 0.0});

  // the returned setting never violates its own limits
  for (std::uint64_t seed = 50; seed < 58; ++seed) {
    GaussianPrior random = prior;
    random.sigma *= 0.3 * double(seed - 49);
    ParticleFilter f(random, 5000, seed);
    const Eigen::Vector4d sigma = f.estimates().variance.cwiseSqrt();
    for (long parity : {0L, 1L}) {
      MeasurementSetting s = select_thresholded(f, menu, th, parity);
      if (const Eigen::Vector4d* limit = th.find(s))
        CHECK((sigma.array() <= limit->array()).all());
    }
  }
}

TEST_CASE("stopping rule") {
  StopThresholds stop;
  stop.rabi = 1.0;
  stop.centerline = 1.0;
  stop.sideband = 1.0;
  stop.phase = 0.5;

  GaussianPrior prior;
  prior.mean = GateParams{10.0, 0.0, 5.0, 0.0};

  prior.sigma << 0.5, 0.5, 0.5, 0.25;  // half of every threshold
  CHECK(should_stop(ParticleFilter(prior, 20000, 61), stop));

  prior.sigma << 0.5, 0.5, 2.0, 0.25;  // one dimension far too wide
  CHECK(!should_stop(ParticleFilter(prior, 20000, 62), stop));

  prior.sigma << 0.5, 0.5, 1.05, 0.25;  // just above: still not converged
  CHECK(!should_stop(ParticleFilter(prior, 20000, 63), stop));
}
