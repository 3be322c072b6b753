#pragma once

#include <functional>
#include <optional>

#include "mscal/rng.hpp"
#include "mscal/types.hpp"

namespace mscal {

// Independent Gaussian prior over the four gate parameters, sigmas in the
// (rabi, centerline, sideband, phase_step) order.
struct GaussianPrior {
  GateParams mean;
  Eigen::Vector4d sigma = Eigen::Vector4d::Ones();

  void validate() const;
};

struct FilterEstimate {
  GateParams mean;
  Eigen::Vector4d variance = Eigen::Vector4d::Zero();
};

// Weighted mean and variance of a 4xN parameter ensemble; weights need not
// be normalized.  The phase row (3) uses the circular mean and wrapped
// deviations.
FilterEstimate weighted_moments(const Eigen::Matrix4Xd& thetas, const Eigen::VectorXd& weights);

// Per-particle outcome probabilities; std::nullopt marks a particle outside
// the likelihood model's support (it then receives the pure depolarized
// floor).  Must be safe to call concurrently.
using LikelihoodFn = std::function<std::optional<OutcomeDistribution>(const GateParams&)>;

// Weighted-particle posterior over gate parameters.  The phase coordinate
// lives on the circle: sampling, moments, shrinkage, and translation all wrap
// it to (-pi, pi].
class ParticleFilter {
 public:
  ParticleFilter(const GaussianPrior& prior, int count, std::uint64_t seed);

  int count() const { return int(theta_.cols()); }
  // rows: rabi, centerline, sideband, phase_step
  const Eigen::Matrix4Xd& thetas() const { return theta_; }
  const Eigen::VectorXd& weights() const { return weight_; }
  GateParams particle(int i) const { return GateParams::from_vec(theta_.col(i)); }

  // Bayes update for one batch of identically configured shots.  Per-particle
  // class likelihoods are mixed with the depolarizing floor u = (1/4, 1/2,
  // 1/4): q = (1 - depolarizing) p + depolarizing u.  Log-space accumulation;
  // throws "posterior collapsed" if no particle retains finite weight.
  void update(const ShotCounts& counts, const LikelihoodFn& likelihood,
              double depolarizing = 0.01, unsigned threads = 0);

  // Weighted mean and variance; the phase mean is circular (atan2 of averaged
  // sines/cosines) with variance from wrapped deviations.
  FilterEstimate estimates() const;
  // Weighted covariance with wrapped deviations on the phase row/column.
  Eigen::Matrix4d covariance() const;

  // Liu-West resample: multinomial draw by weight, shrink toward the mean by
  // a, jitter with covariance (1 - a^2) Cov, reset weights to uniform.  A
  // degenerate (zero-covariance) filter is duplicated without jitter.
  void resample(double shrinkage = 0.98);

  // Rigid shift of every particle (feedback bookkeeping); the phase
  // component wraps.
  void translate(const Eigen::Vector4d& offset);

 private:
  Eigen::Matrix4Xd theta_;
  Eigen::VectorXd weight_;
  RandomStream rng_;
};

}  // namespace mscal
