#pragma once

#include <Eigen/Dense>

namespace mmsb {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

/// Per-dimension affine map x -> (x - offset) / scale, applied row-wise to
/// point matrices (rows are points).
struct AffineTransform {
  VectorXd offset;
  VectorXd scale;

  static AffineTransform identity(Eigen::Index d) {
    return {VectorXd::Zero(d), VectorXd::Ones(d)};
  }

  Eigen::Index dimension() const { return offset.size(); }

  MatrixXd apply(const MatrixXd& points) const {
    return (points.rowwise() - offset.transpose()).array().rowwise() /
           scale.transpose().array();
  }

  MatrixXd inverse(const MatrixXd& points) const {
    return (points.array().rowwise() * scale.transpose().array()).matrix().rowwise() +
           offset.transpose();
  }
};

/// Discrete distribution: rows of `points` are atoms in R^d.
struct WeightedParticles {
  MatrixXd points;
  VectorXd weights;

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dimension() const { return points.cols(); }

  static WeightedParticles uniform(MatrixXd points) {
    const Eigen::Index m = points.rows();
    return {std::move(points), VectorXd::Constant(m, 1.0 / static_cast<double>(m))};
  }
};

}  // namespace mmsb
