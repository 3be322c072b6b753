#include "mscal/particle_filter.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mscal/parallel.hpp"

namespace mscal {

void GaussianPrior::validate() const {
  if (!(sigma.minCoeff() > 0.0)) throw std::invalid_argument("prior sigmas must be positive");
}

ParticleFilter::ParticleFilter(const GaussianPrior& prior, int count, std::uint64_t seed)
    : rng_(seed) {
  prior.validate();
  if (count < 2) throw std::invalid_argument("need at least two particles");
  theta_.resize(4, count);
  const Eigen::Vector4d mu = prior.mean.vec();
  for (int i = 0; i < count; ++i) {
    for (int d = 0; d < 4; ++d) theta_(d, i) = mu[d] + prior.sigma[d] * rng_.gaussian();
    theta_(3, i) = wrap_pi(theta_(3, i));
  }
  weight_ = Eigen::VectorXd::Constant(count, 1.0 / count);
}

void ParticleFilter::update(const ShotCounts& counts, const LikelihoodFn& likelihood,
                            double depolarizing, unsigned threads) {
  if (counts.gg < 0 || counts.one < 0 || counts.ee < 0)
    throw std::invalid_argument("negative shot counts");
  if (depolarizing < 0.0 || depolarizing > 1.0)
    throw std::invalid_argument("depolarizing fraction outside [0, 1]");
  if (counts.total() == 0) return;

  const int n = count();
  Eigen::VectorXd loglik(n);
  parallel_for(
      std::size_t(n),
      [&](std::size_t i) {
        const std::optional<OutcomeDistribution> p = likelihood(particle(int(i)));
        // depolarized class probabilities; outside the model's support only
        // the floor remains
        double q[3] = {0.25, 0.5, 0.25};
        if (p) {
          q[0] = (1.0 - depolarizing) * p->p_gg + depolarizing * 0.25;
          q[1] = (1.0 - depolarizing) * p->p_one + depolarizing * 0.5;
          q[2] = (1.0 - depolarizing) * p->p_ee + depolarizing * 0.25;
        }
        double ll = 0.0;
        const long nc[3] = {counts.gg, counts.one, counts.ee};
        for (int m = 0; m < 3; ++m)
          if (nc[m] > 0) ll += double(nc[m]) * std::log(q[m]);
        loglik[i] = ll;
      },
      threads);

  Eigen::ArrayXd lw = weight_.array().log() + loglik.array();
  const double peak = lw.maxCoeff();
  if (!std::isfinite(peak)) throw std::runtime_error("posterior collapsed");
  Eigen::ArrayXd w = (lw - peak).exp();
  const double total = w.sum();
  if (!std::isfinite(total) || total <= 0.0) throw std::runtime_error("posterior collapsed");
  weight_ = (w / total).matrix();
}

FilterEstimate weighted_moments(const Eigen::Matrix4Xd& thetas, const Eigen::VectorXd& weights) {
  const double total = weights.sum();
  if (!(total > 0.0)) throw std::invalid_argument("weights must have positive mass");
  const Eigen::VectorXd w = weights / total;

  FilterEstimate est;
  Eigen::Vector4d mu;
  for (int d = 0; d < 3; ++d) mu[d] = thetas.row(d) * w;
  const Eigen::ArrayXd ph = thetas.row(3).transpose().array();
  const double s = (ph.sin() * w.array()).sum();
  const double c = (ph.cos() * w.array()).sum();
  mu[3] = wrap_pi(std::atan2(s, c));

  for (int d = 0; d < 3; ++d)
    est.variance[d] = (thetas.row(d).transpose().array() - mu[d]).square().matrix().dot(w);
  double v3 = 0.0;
  for (int i = 0; i < int(thetas.cols()); ++i) {
    const double dphi = wrap_pi(thetas(3, i) - mu[3]);
    v3 += w[i] * dphi * dphi;
  }
  est.variance[3] = v3;
  est.mean = GateParams::from_vec(mu);
  return est;
}

FilterEstimate ParticleFilter::estimates() const { return weighted_moments(theta_, weight_); }

Eigen::Matrix4d ParticleFilter::covariance() const {
  const Eigen::Vector4d mu = estimates().mean.vec();
  Eigen::Matrix4Xd dev = theta_.colwise() - mu;
  for (int i = 0; i < count(); ++i) dev(3, i) = wrap_pi(theta_(3, i) - mu[3]);
  return (dev.array().rowwise() * weight_.transpose().array()).matrix() * dev.transpose();
}

void ParticleFilter::resample(double shrinkage) {
  if (!(shrinkage > 0.0 && shrinkage < 1.0))
    throw std::invalid_argument("shrinkage must be in (0, 1)");
  const int n = count();
  const Eigen::Vector4d mu = estimates().mean.vec();
  const Eigen::Matrix4d cov = covariance();

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(cov);
  Eigen::Matrix4d root = es.eigenvectors() *
                         es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                         es.eigenvectors().transpose();
  root *= std::sqrt(1.0 - shrinkage * shrinkage);

  std::vector<double> cum(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) cum[i] = (acc += weight_[i]);

  Eigen::Matrix4Xd fresh(4, n);
  for (int i = 0; i < n; ++i) {
    const double u = rng_.uniform() * acc;
    const int j = int(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    Eigen::Vector4d dev = theta_.col(std::min(j, n - 1)) - mu;
    dev[3] = wrap_pi(theta_(3, std::min(j, n - 1)) - mu[3]);
    Eigen::Vector4d g;
    for (int d = 0; d < 4; ++d) g[d] = rng_.gaussian();
    fresh.col(i) = mu + shrinkage * dev + root * g;
    fresh(3, i) = wrap_pi(fresh(3, i));
  }
  theta_ = std::move(fresh);
  weight_.setConstant(1.0 / n);
}

void ParticleFilter::translate(const Eigen::Vector4d& offset) {
  theta_.colwise() += offset;
  for (int i = 0; i < count(); ++i) theta_(3, i) = wrap_pi(theta_(3, i));
}

}  // namespace mscal
