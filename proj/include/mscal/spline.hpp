#pragma once

#include <array>
#include <vector>

#include "mscal/types.hpp"

namespace mscal {

// One uniformly sampled grid axis.
struct GridAxis {
  double min = 0.0;
  double max = 1.0;
  int count = 2;

  double step() const { return (max - min) / (count - 1); }
  double node(int i) const { return min + i * step(); }
  bool contains(double x) const { return x >= min && x <= max; }
  bool operator==(const GridAxis&) const = default;
};

// B-spline coefficients (n+2 of them) whose cubic spline interpolates y on
// uniform nodes with not-a-knot boundaries: S''' is continuous across the
// first and last interior knots, which makes the rule exact for cubic
// polynomials.  Requires at least 4 samples.
Eigen::VectorXd not_a_knot_coefficients(const Eigen::VectorXd& y);

// Segment polynomials of the uniform cubic B-spline at fraction u in [0,1];
// the spline over cell i is sum_k w[k] c[i+k].
std::array<double, 4> bspline_weights(double u);

// Tensor-product not-a-knot cubic spline on a uniform 4-D grid carrying one
// or more interleaved value channels.  Evaluation gathers only the 4^4 local
// coefficients per query.
class Spline4 {
 public:
  Spline4() = default;
  // values laid out node-major with axis 3 fastest and channels innermost
  Spline4(const std::array<GridAxis, 4>& axes, int channels,
          const std::vector<double>& values);

  const std::array<GridAxis, 4>& axes() const { return axes_; }
  int channels() const { return channels_; }
  bool inside(const std::array<double, 4>& x) const;

  // Fill out[0..channels) with the spline values at x; throws
  // "outside grid support" when any coordinate leaves its axis.
  void evaluate(const std::array<double, 4>& x, double* out) const;

  const std::vector<double>& coefficients() const { return coef_; }

 private:
  std::array<GridAxis, 4> axes_{};
  int channels_ = 0;
  std::array<int, 4> ncoef_{};  // count + 2 along each axis
  std::vector<double> coef_;
};

}  // namespace mscal
