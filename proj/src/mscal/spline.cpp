#include "mscal/spline.hpp"

#include <Eigen/LU>
#include <cmath>
#include <stdexcept>

namespace mscal {

namespace {

// Collocation matrix for n+2 coefficients: node values (c_i + 4c_{i+1} +
// c_{i+2})/6 = y_i in the first n rows, vanishing fourth differences (the
// not-a-knot conditions at the first and last interior knots) in the last two.
Eigen::MatrixXd collocation_matrix(int n) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + 2, n + 2);
  for (int i = 0; i < n; ++i) {
    A(i, i) = 1.0;
    A(i, i + 1) = 4.0;
    A(i, i + 2) = 1.0;
  }
  const double d4[5] = {1.0, -4.0, 6.0, -4.0, 1.0};
  for (int k = 0; k < 5; ++k) {
    A(n, k) = d4[k];
    A(n + 1, n - 3 + k) = d4[k];
  }
  return A;
}

}  // namespace

Eigen::VectorXd not_a_knot_coefficients(const Eigen::VectorXd& y) {
  const int n = int(y.size());
  if (n < 4) throw std::invalid_argument("need at least 4 samples per axis");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 2);
  rhs.head(n) = 6.0 * y;
  return collocation_matrix(n).partialPivLu().solve(rhs);
}

std::array<double, 4> bspline_weights(double u) {
  const double v = 1.0 - u, u2 = u * u, u3 = u2 * u;
  return {v * v * v / 6.0, (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0,
          (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0, u3 / 6.0};
}

Spline4::Spline4(const std::array<GridAxis, 4>& axes, int channels,
                 const std::vector<double>& values)
    : axes_(axes), channels_(channels) {
  std::size_t n_nodes = 1;
  for (int a = 0; a < 4; ++a) {
    if (axes_[a].count < 4) throw std::invalid_argument("need at least 4 samples per axis");
    if (!(axes_[a].max > axes_[a].min)) throw std::invalid_argument("axis range empty");
    ncoef_[a] = axes_[a].count + 2;
    n_nodes *= axes_[a].count;
  }
  if (channels_ < 1) throw std::invalid_argument("need at least one channel");
  if (values.size() != n_nodes * std::size_t(channels_))
    throw std::invalid_argument("value array does not match grid shape");

  // Sweep the 1-D solve along each axis in turn; dims tracks the current
  // buffer shape with channels as a fifth, fastest-varying dimension.
  std::vector<double> buf = values;
  std::array<std::size_t, 5> dims{std::size_t(axes_[0].count), std::size_t(axes_[1].count),
                                  std::size_t(axes_[2].count), std::size_t(axes_[3].count),
                                  std::size_t(channels_)};
  for (int a = 3; a >= 0; --a) {
    const int n = int(dims[a]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(collocation_matrix(n));

    std::size_t outer = 1, inner = dims[4];
    for (int d = 0; d < a; ++d) outer *= dims[d];
    for (int d = a + 1; d < 4; ++d) inner *= dims[d];

    std::vector<double> out(outer * std::size_t(n + 2) * inner);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 2, inner);
    for (std::size_t o = 0; o < outer; ++o) {
      for (int i = 0; i < n; ++i)
        for (std::size_t j = 0; j < inner; ++j)
          rhs(i, j) = 6.0 * buf[(o * n + i) * inner + j];
      Eigen::MatrixXd c = lu.solve(rhs);
      for (int i = 0; i < n + 2; ++i)
        for (std::size_t j = 0; j < inner; ++j)
          out[(o * (n + 2) + i) * inner + j] = c(i, j);
    }
    buf.swap(out);
    dims[a] = std::size_t(n + 2);
  }
  coef_.swap(buf);
}

bool Spline4::inside(const std::array<double, 4>& x) const {
  for (int a = 0; a < 4; ++a)
    if (!axes_[a].contains(x[a])) return false;
  return true;
}

void Spline4::evaluate(const std::array<double, 4>& x, double* out) const {
  int cell[4];
  std::array<double, 4> w[4];
  for (int a = 0; a < 4; ++a) {
    const GridAxis& ax = axes_[a];
    if (!ax.contains(x[a])) throw std::domain_error("outside grid support");
    double t = (x[a] - ax.min) / ax.step();
    int i = std::min(int(t), ax.count - 2);
    cell[a] = i;
    w[a] = bspline_weights(t - i);
  }

  for (int ch = 0; ch < channels_; ++ch) out[ch] = 0.0;
  const std::size_t s3 = std::size_t(channels_);
  const std::size_t s2 = s3 * ncoef_[3];
  const std::size_t s1 = s2 * ncoef_[2];
  const std::size_t s0 = s1 * ncoef_[1];
  const double* base = coef_.data() + cell[0] * s0 + cell[1] * s1 + cell[2] * s2 + cell[3] * s3;
  for (int k0 = 0; k0 < 4; ++k0)
    for (int k1 = 0; k1 < 4; ++k1)
      for (int k2 = 0; k2 < 4; ++k2) {
        const double w012 = w[0][k0] * w[1][k1] * w[2][k2];
        const double* p = base + k0 * s0 + k1 * s1 + k2 * s2;
        for (int k3 = 0; k3 < 4; ++k3) {
          const double wt = w012 * w[3][k3];
          for (int ch = 0; ch < channels_; ++ch) out[ch] += wt * p[k3 * s3 + ch];
        }
      }
}

}  // namespace mscal
