#pragma once

// Reference multimarginal Sinkhorn on the fully materialized order-s tensor.
// Exponential in s; used to cross-check the path-structured solver.

#include <cmath>
#include <vector>

#include "mmsb/bridge.hpp"

namespace mmsb {

/// Dense order-s tensor with n entries per mode, first mode fastest.
template <typename Scalar = double>
class DenseTensor {
 public:
  DenseTensor() = default;
  DenseTensor(Eigen::Index n, std::size_t order) : n_(n), order_(order) {
    std::size_t total = 1;
    for (std::size_t k = 0; k < order; ++k) total *= static_cast<std::size_t>(n);
    data_.assign(total, Scalar(0));
  }

  Eigen::Index extent() const { return n_; }
  std::size_t order() const { return order_; }
  std::size_t size() const { return data_.size(); }

  Scalar& operator[](std::size_t flat) { return data_[flat]; }
  Scalar operator[](std::size_t flat) const { return data_[flat]; }

  /// Multi-index of a flat offset.
  std::vector<Eigen::Index> unravel(std::size_t flat) const {
    std::vector<Eigen::Index> idx(order_);
    for (std::size_t k = 0; k < order_; ++k) {
      idx[k] = static_cast<Eigen::Index>(flat % static_cast<std::size_t>(n_));
      flat /= static_cast<std::size_t>(n_);
    }
    return idx;
  }

  Vector<Scalar> marginal(std::size_t mode) const {
    Vector<Scalar> out = Vector<Scalar>::Zero(n_);
    const std::size_t stride = stride_of(mode);
    for (std::size_t f = 0; f < data_.size(); ++f) {
      out((f / stride) % static_cast<std::size_t>(n_)) += data_[f];
    }
    return out;
  }

  Matrix<Scalar> pair_marginal(std::size_t first, std::size_t second) const {
    Matrix<Scalar> out = Matrix<Scalar>::Zero(n_, n_);
    const std::size_t s1 = stride_of(first);
    const std::size_t s2 = stride_of(second);
    const auto n = static_cast<std::size_t>(n_);
    for (std::size_t f = 0; f < data_.size(); ++f) {
      out((f / s1) % n, (f / s2) % n) += data_[f];
    }
    return out;
  }

  Scalar sum() const {
    Scalar total(0);
    for (Scalar v : data_) total += v;
    return total;
  }

 private:
  std::size_t stride_of(std::size_t mode) const {
    std::size_t stride = 1;
    for (std::size_t k = 0; k < mode; ++k) stride *= static_cast<std::size_t>(n_);
    return stride;
  }

  Eigen::Index n_ = 0;
  std::size_t order_ = 0;
  std::vector<Scalar> data_;
};

inline constexpr double kDenseOracleLimit = 1e6;

/// Returns the converged K ⊙ U. Refuses when n^s exceeds 1e6 entries.
template <typename Scalar = double>
DenseTensor<Scalar> dense_oracle_solve(const SnapshotSequence& seq, const SolverConfig& cfg) {
  validate(seq);
  validate(cfg);
  const Eigen::Index n = seq.points();
  const std::size_t s = seq.size();
  if (std::pow(static_cast<double>(n), static_cast<double>(s)) > kDenseOracleLimit) {
    throw Error(ErrorKind::Refusal, "dense oracle refuses n^s = " + std::to_string(n) + "^" +
                                        std::to_string(s) + " > 1e6 entries");
  }
  const KernelChain<Scalar> chain = build_kernel_chain(build_cost_chain<Scalar>(seq), cfg);

  DenseTensor<Scalar> kernel(n, s);
  for (std::size_t f = 0; f < kernel.size(); ++f) {
    const auto idx = kernel.unravel(f);
    Scalar v(1);
    for (std::size_t k = 0; k + 1 < s; ++k) v *= chain.matrices[k](idx[k], idx[k + 1]);
    kernel[f] = v;
  }

  ScalingVectors<Scalar> u(s, Vector<Scalar>::Ones(n));
  const auto scaled = [&] {
    DenseTensor<Scalar> m = kernel;
    for (std::size_t f = 0; f < m.size(); ++f) {
      const auto idx = m.unravel(f);
      for (std::size_t k = 0; k < s; ++k) m[f] *= u[k](idx[k]);
    }
    return m;
  };

  const std::vector<Vector<Scalar>> mu = marginal_weights<Scalar>(seq);
  for (int it = 0; it < cfg.max_iterations; ++it) {
    for (std::size_t k = 0; k < s; ++k) {
      const Vector<Scalar> proj = scaled().marginal(k);
      u[k] = u[k].cwiseProduct(mu[k]).cwiseQuotient(proj);
      if (!u[k].allFinite()) {
        throw Error(ErrorKind::Numerical, "dense oracle diverged at snapshot " + std::to_string(k + 1));
      }
    }
    const DenseTensor<Scalar> m = scaled();
    Scalar err(0);
    for (std::size_t k = 0; k < s; ++k) {
      err = std::max(err, (m.marginal(k) - mu[k]).template lpNorm<1>());
    }
    if (err <= static_cast<Scalar>(cfg.tolerance)) return m;
  }
  throw Error(ErrorKind::NonConvergence, "dense oracle did not converge");
}

}  // namespace mmsb
