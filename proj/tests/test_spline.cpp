#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mscal/spline.hpp"

using namespace mscal;

namespace {

// scalar spline helper over unit-spaced nodes
double eval_1d(const Eigen::VectorXd& y, double x) {
  Eigen::VectorXd c = not_a_knot_coefficients(y);
  int i = std::min(int(x), int(y.size()) - 2);
  auto w = bspline_weights(x - i);
  return w[0] * c[i] + w[1] * c[i + 1] + w[2] * c[i + 2] + w[3] * c[i + 3];
}

}  // namespace

TEST_CASE("basis weights partition unity and interpolate at nodes") {
  for (double u : {0.0, 0.25, 0.5, 0.9, 1.0}) {
    auto w = bspline_weights(u);
    CHECK(w[0] + w[1] + w[2] + w[3] == doctest::Approx(1.0).epsilon(1e-15));
  }
  auto w0 = bspline_weights(0.0);
  CHECK(w0[0] == doctest::Approx(1.0 / 6.0));
  CHECK(w0[1] == doctest::Approx(4.0 / 6.0));
  CHECK(w0[2] == doctest::Approx(1.0 / 6.0));
  CHECK(w0[3] == 0.0);
}

TEST_CASE("interpolates the samples") {
  Eigen::VectorXd y(6);
  y << 0.0, 1.0, 0.5, 2.0, -1.0, 0.3;
  for (int i = 0; i < 6; ++i) CHECK(eval_1d(y, double(i)) == doctest::Approx(y[i]).epsilon(1e-13));
}

TEST_CASE("matches an independent not-a-knot implementation") {
  Eigen::VectorXd y(6);
  y << 0.0, 1.0, 0.5, 2.0, -1.0, 0.3;
  CHECK(eval_1d(y, 0.4) == doctest::Approx(1.039946666666667).epsilon(1e-12));
  CHECK(eval_1d(y, 2.3) == doctest::Approx(1.032366666666666).epsilon(1e-12));
  CHECK(eval_1d(y, 4.9) == doctest::Approx(-0.409579999999998).epsilon(1e-11));
}

TEST_CASE("exact for cubics, including the 4-sample minimum") {
  auto cubic = [](double x) { return 0.3 * x * x * x - 1.1 * x * x + 0.25 * x + 2.0; };
  Eigen::VectorXd y(7);
  for (int i = 0; i < 7; ++i) y[i] = cubic(i);
  for (double x : {0.15, 1.5, 3.33, 5.95}) CHECK(eval_1d(y, x) == doctest::Approx(cubic(x)).epsilon(1e-12));

  Eigen::VectorXd y4(4);
  y4 << 1.0, -0.5, 0.25, 2.0;
  CHECK(eval_1d(y4, 1.7) == doctest::Approx(-0.136875).epsilon(1e-12));

  Eigen::VectorXd y3(3);
  y3 << 1.0, 2.0, 3.0;
  CHECK_THROWS_AS(not_a_knot_coefficients(y3), std::invalid_argument);
}

TEST_CASE("tensor product reproduces node values and separable cubics") {
  std::array<GridAxis, 4> axes{GridAxis{0.0, 1.0, 5}, GridAxis{-1.0, 1.0, 6},
                               GridAxis{0.0, 2.0, 4}, GridAxis{0.0, 1.0, 7}};
  auto g0 = [](double x) { return x * x * x - x; };
  auto g1 = [](double x) { return 2.0 * x * x + 0.5; };
  auto g2 = [](double x) { return x + 1.0; };
  auto g3 = [](double x) { return 1.0 - 0.4 * x * x * x; };

  std::vector<double> vals;
  for (int i0 = 0; i0 < 5; ++i0)
    for (int i1 = 0; i1 < 6; ++i1)
      for (int i2 = 0; i2 < 4; ++i2)
        for (int i3 = 0; i3 < 7; ++i3) {
          double f = g0(axes[0].node(i0)) * g1(axes[1].node(i1)) * g2(axes[2].node(i2)) *
                     g3(axes[3].node(i3));
          vals.push_back(f);        // channel 0
          vals.push_back(2.0 * f);  // channel 1 rides along
        }
  Spline4 sp(axes, 2, vals);

  double out[2];
  sp.evaluate({axes[0].node(2), axes[1].node(4), axes[2].node(1), axes[3].node(6)}, out);
  CHECK(out[0] == doctest::Approx(g0(axes[0].node(2)) * g1(axes[1].node(4)) *
                                  g2(axes[2].node(1)) * g3(axes[3].node(6)))
                      .epsilon(1e-12));

  for (auto p : {std::array<double, 4>{0.33, -0.71, 1.2, 0.05},
                 std::array<double, 4>{0.99, 0.87, 0.01, 0.93}}) {
    sp.evaluate(p, out);
    const double f = g0(p[0]) * g1(p[1]) * g2(p[2]) * g3(p[3]);
    CHECK(out[0] == doctest::Approx(f).epsilon(1e-11));
    CHECK(out[1] == doctest::Approx(2.0 * f).epsilon(1e-11));
  }
}

TEST_CASE("matches an independent 4-D cubic interpolator") {
  std::array<GridAxis, 4> axes{GridAxis{0.0, 1.0, 5}, GridAxis{-1.0, 1.0, 6},
                               GridAxis{0.0, 2.0, 4}, GridAxis{0.0, 1.0, 7}};
  std::vector<double> vals;
  for (int i0 = 0; i0 < 5; ++i0)
    for (int i1 = 0; i1 < 6; ++i1)
      for (int i2 = 0; i2 < 4; ++i2)
        for (int i3 = 0; i3 < 7; ++i3) {
          const double x0 = axes[0].node(i0), x1 = axes[1].node(i1);
          const double x2 = axes[2].node(i2), x3 = axes[3].node(i3);
          vals.push_back(std::sin(3.0 * x0) * std::exp(0.5 * x1) + std::cos(2.0 * x2 + x3) +
                         0.3 * x0 * x3);
        }
  Spline4 sp(axes, 1, vals);

  double out;
  sp.evaluate({0.37, 0.21, 1.41, 0.63}, &out);
  CHECK(out == doctest::Approx(0.084374621281153).epsilon(1e-11));
  sp.evaluate({0.05, -0.93, 0.1, 0.96}, &out);
  CHECK(out == doctest::Approx(0.448398581565100).epsilon(1e-11));
  sp.evaluate({0.5, 0.0, 1.0, 0.5}, &out);
  CHECK(out == doctest::Approx(0.322514018896594).epsilon(1e-11));

  CHECK(sp.inside({0.0, -1.0, 2.0, 1.0}));
  CHECK(!sp.inside({0.0, -1.001, 2.0, 1.0}));
  CHECK_THROWS_WITH_AS(sp.evaluate({1.2, 0.0, 1.0, 0.5}, &out), "outside grid support",
                       std::domain_error);
}
