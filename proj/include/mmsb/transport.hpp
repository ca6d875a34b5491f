#pragma once

#include <Eigen/Sparse>

#include "mmsb/types.hpp"

namespace mmsb {

struct TransportResult {
  double cost = 0.0;      // optimal objective, squared-distance units
  double distance = 0.0;  // sqrt(cost)
  Eigen::SparseMatrix<double> plan;  // m1 x m2, filled when requested
  std::size_t pivots = 0;
};

/// Exact minimum-cost transportation between supplies `a` and demands `b`
/// (both nonnegative with equal totals) over the complete bipartite graph
/// with row-major `cost`. Network simplex with block-search pricing.
TransportResult solve_transport(const VectorXd& a, const VectorXd& b,
                                const RowMatrix<double>& cost, bool want_plan = false);

/// Squared-Euclidean ground cost between the atoms of p and q.
RowMatrix<double> squared_distances(const MatrixXd& p, const MatrixXd& q);

/// Exact 2-Wasserstein distance. Weights must sum to 1 within 1e-6.
TransportResult wasserstein(const WeightedParticles& p, const WeightedParticles& q,
                            bool want_plan = false);

}  // namespace mmsb
