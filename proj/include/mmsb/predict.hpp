#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>

#include "mmsb/bridge.hpp"

namespace mmsb {

struct Interval {
  std::size_t sigma = 0;  // 0-based left snapshot
  double lambda = 0.0;
};

/// Interval [τ_σ, τ_σ+1) containing τ; the last interval is closed so τ_s
/// maps to (s−2, 1) in 0-based terms. No extrapolation.
Interval locate_interval(std::span<const double> times, double tau);

struct Query {
  double tau = 0.0;
  double prune_threshold = 0.0;  // in [0, 1)
};

/// Drops atoms whose weight is below `threshold` and renormalizes.
WeightedParticles prune(WeightedParticles p, double threshold);

/// Atoms (1−λ) ξ^i(τ_σ) + λ ξ^j(τ_σ+1) weighted by the consecutive plan
/// M^{σ→σ+1}_{ij}, i-major order, reported in raw units.
template <typename Scalar>
WeightedParticles predict_distribution(const BridgeSolution<Scalar>& sol, const Query& q) {
  if (!sol.converged || sol.scalings.empty()) {
    throw Error(ErrorKind::State, "bridge is not solved");
  }
  if (!(q.prune_threshold >= 0.0 && q.prune_threshold < 1.0)) {
    throw Error(ErrorKind::Argument, "prune threshold must lie in [0, 1)");
  }
  const Interval iv = locate_interval(sol.marginals.times, q.tau);
  const MatrixXd plan = project_pair(sol, iv.sigma, iv.sigma + 1).template cast<double>();
  const MatrixXd src = sol.transform.inverse(sol.marginals.supports[iv.sigma]);
  const MatrixXd dst = sol.transform.inverse(sol.marginals.supports[iv.sigma + 1]);

  const Eigen::Index n = plan.rows();
  const Eigen::Index m = plan.cols();
  WeightedParticles out;
  out.points.resize(n * m, src.cols());
  out.weights.resize(n * m);
  const double total = plan.sum();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::Index row = i * m + j;
      out.points.row(row) = (1.0 - iv.lambda) * src.row(i) + iv.lambda * dst.row(j);
      out.weights(row) = plan(i, j) / total;
    }
  }
  return q.prune_threshold > 0.0 ? prune(std::move(out), q.prune_threshold) : out;
}

struct Moments {
  VectorXd mean;
  MatrixXd covariance;
};

/// Weighted mean and covariance, no small-sample correction.
Moments summarize(const WeightedParticles& p);

}  // namespace mmsb
