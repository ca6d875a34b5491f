#pragma once

// Path-structured multimarginal Sinkhorn.
//
// The mass tensor M = K ⊙ (u_1 ⊗ ... ⊗ u_s) is never formed. With a cost
// that is a sum of consecutive pairwise terms, every marginal factors as
//
//   proj_σ(M) = φ_σ ⊙ u_σ ⊙ ψ_σ,
//   φ_1 = 1,  φ_{σ+1} = K_σᵀ (φ_σ ⊙ u_σ),
//   ψ_s = 1,  ψ_σ     = K_σ  (u_{σ+1} ⊙ ψ_{σ+1}),
//
// so one update u_σ <- μ_σ ⊘ (φ_σ ⊙ ψ_σ) for every σ costs 2(s-1) n x n
// matrix-vector products per sweep.

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mmsb/error.hpp"
#include "mmsb/marginals.hpp"
#include "mmsb/types.hpp"

namespace mmsb {

enum class CostScale { None, Mean, Max };

std::string_view to_string(CostScale scale);
CostScale parse_cost_scale(std::string_view name);

struct SolverConfig {
  double epsilon = 0.1;
  double tolerance = 1e-8;  // on max_σ ‖proj_σ − μ_σ‖₁
  int max_iterations = 5000;
  CostScale cost_scale = CostScale::Mean;
  // Recompute every prefix/suffix product from scratch for each update
  // instead of carrying them through the sweep. Same arithmetic, O(s²n²).
  bool recompute_products = false;
};

void validate(const SolverConfig& cfg);

template <typename Scalar = double>
struct CostChain {
  std::vector<Matrix<Scalar>> matrices;  // C^{σ→σ+1}, n x n
  std::string metric = "sqeuclidean";
};

template <typename Scalar = double>
struct KernelChain {
  std::vector<Matrix<Scalar>> matrices;  // exp(−C^{σ→σ+1} / (factor ε))
  Scalar epsilon = Scalar(0.1);
  CostScale cost_scale = CostScale::None;
  Scalar cost_scale_factor = Scalar(1);

  std::size_t snapshots() const { return matrices.size() + 1; }
  Eigen::Index points() const { return matrices.empty() ? 0 : matrices.front().rows(); }
};

template <typename Scalar = double>
using ScalingVectors = std::vector<Vector<Scalar>>;

template <typename Scalar = double>
struct SweepRecord {
  Vector<Scalar> hilbert_distances;   // d_H(u_σ^(k), u_σ^(k−1))
  Vector<Scalar> marginal_l1_errors;  // ‖proj_σ − μ_σ‖₁ after the sweep
  double wall_time = 0.0;             // seconds since the solve started
};

template <typename Scalar = double>
struct BridgeSolution {
  KernelChain<Scalar> kernel;
  ScalingVectors<Scalar> scalings;
  SnapshotSequence marginals;
  AffineTransform transform;  // raw -> solver coordinates of `marginals`
  std::vector<SweepRecord<Scalar>> diagnostics;
  bool converged = false;

  std::size_t snapshots() const { return scalings.size(); }
  Eigen::Index points() const { return scalings.empty() ? 0 : scalings.front().size(); }
  std::size_t sweeps() const { return diagnostics.size(); }
};

template <typename Scalar>
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, BridgeSolution<Scalar> partial)
      : Error(ErrorKind::NonConvergence, what), partial_(std::move(partial)) {}

  const BridgeSolution<Scalar>& partial() const noexcept { return partial_; }

 private:
  BridgeSolution<Scalar> partial_;
};

/// Hilbert projective metric log(max(u/v) / min(u/v)) on the positive cone.
template <typename DerivedU, typename DerivedV>
typename DerivedU::Scalar hilbert_distance(const Eigen::MatrixBase<DerivedU>& u,
                                           const Eigen::MatrixBase<DerivedV>& v) {
  using Scalar = typename DerivedU::Scalar;
  if (u.size() != v.size() || u.size() == 0) {
    throw Error(ErrorKind::Argument, "hilbert_distance: vectors must be nonempty and equal length");
  }
  if (!((u.array() > Scalar(0)).all() && (v.array() > Scalar(0)).all())) {
    throw Error(ErrorKind::Argument, "hilbert_distance: entries must be strictly positive");
  }
  const auto ratio = (u.array() / v.array()).eval();
  return std::log(ratio.maxCoeff() / ratio.minCoeff());
}

template <typename Scalar = double>
CostChain<Scalar> build_cost_chain(const SnapshotSequence& seq) {
  if (seq.size() < 2) throw Error(ErrorKind::Validation, "cost chain needs at least two snapshots");
  CostChain<Scalar> chain;
  chain.matrices.reserve(seq.size() - 1);
  for (std::size_t k = 0; k + 1 < seq.size(); ++k) {
    const Matrix<Scalar> src = seq.supports[k].template cast<Scalar>();
    const Matrix<Scalar> dst = seq.supports[k + 1].template cast<Scalar>();
    Matrix<Scalar> cost(src.rows(), dst.rows());
    for (Eigen::Index j = 0; j < dst.rows(); ++j) {
      auto col = cost.col(j).array();
      col = (src.col(0).array() - dst(j, 0)).square();
      for (Eigen::Index c = 1; c < src.cols(); ++c) col += (src.col(c).array() - dst(j, c)).square();
    }
    chain.matrices.push_back(std::move(cost));
  }
  return chain;
}

template <typename Scalar>
KernelChain<Scalar> build_kernel_chain(const CostChain<Scalar>& costs, const SolverConfig& cfg) {
  validate(cfg);
  KernelChain<Scalar> kernel;
  kernel.epsilon = static_cast<Scalar>(cfg.epsilon);
  kernel.cost_scale = cfg.cost_scale;

  Scalar factor(1);
  if (cfg.cost_scale != CostScale::None) {
    Scalar pooled(0);
    Eigen::Index count = 0;
    for (const auto& c : costs.matrices) {
      if (cfg.cost_scale == CostScale::Mean) {
        pooled += c.sum();
        count += c.size();
      } else {
        pooled = std::max(pooled, c.maxCoeff());
      }
    }
    if (cfg.cost_scale == CostScale::Mean && count > 0) pooled /= static_cast<Scalar>(count);
    if (pooled > Scalar(0)) factor = pooled;
  }
  kernel.cost_scale_factor = factor;

  constexpr Scalar kFloor = Scalar(1e-300);
  const Scalar denom = factor * kernel.epsilon;
  kernel.matrices.reserve(costs.matrices.size());
  for (std::size_t k = 0; k < costs.matrices.size(); ++k) {
    const auto& c = costs.matrices[k];
    if (!c.allFinite() || (c.array() < Scalar(0)).any()) {
      throw Error(ErrorKind::Validation, "cost matrix " + std::to_string(k + 1) +
                                             " must be finite and nonnegative");
    }
    Matrix<Scalar> kmat = (-(c.array() / denom)).exp().matrix();
    const auto alive = (kmat.array() >= kFloor).eval();
    if (!alive.rowwise().any().all() || !alive.colwise().any().all()) {
      throw Error(ErrorKind::Underflow,
                  "kernel " + std::to_string(k + 1) + "→" + std::to_string(k + 2) +
                      " has a row or column entirely below 1e-300; increase epsilon or enable "
                      "cost scaling/standardization");
    }
    kernel.matrices.push_back(std::move(kmat));
  }
  return kernel;
}

/// φ_σ (0-based σ): left product u_1ᵀ K_1 diag(u_2) K_2 ... reaching snapshot σ.
template <typename Scalar>
Vector<Scalar> prefix_product(const KernelChain<Scalar>& kernel, const ScalingVectors<Scalar>& u,
                              std::size_t sigma) {
  Vector<Scalar> phi = Vector<Scalar>::Ones(u[0].size());
  for (std::size_t j = 0; j < sigma; ++j) {
    phi = kernel.matrices[j].transpose() * phi.cwiseProduct(u[j]);
  }
  return phi;
}

/// ψ_σ (0-based σ): right product ... K_{s−1} u_s reaching snapshot σ.
template <typename Scalar>
Vector<Scalar> suffix_product(const KernelChain<Scalar>& kernel, const ScalingVectors<Scalar>& u,
                              std::size_t sigma) {
  const std::size_t s = u.size();
  Vector<Scalar> psi = Vector<Scalar>::Ones(u[0].size());
  for (std::size_t j = s - 1; j > sigma; --j) {
    psi = kernel.matrices[j - 1] * u[j].cwiseProduct(psi);
  }
  return psi;
}

/// Stateful Gauss-Seidel sweeps over ascending σ.
template <typename Scalar = double>
class PathSinkhorn {
 public:
  PathSinkhorn(KernelChain<Scalar> kernel, std::vector<Vector<Scalar>> marginals,
               bool recompute_products = false)
      : kernel_(std::move(kernel)),
        mu_(std::move(marginals)),
        recompute_(recompute_products) {
    const std::size_t s = kernel_.snapshots();
    const Eigen::Index n = kernel_.points();
    if (mu_.size() != s) throw Error(ErrorKind::Argument, "marginal count does not match kernel chain");
    for (const auto& m : mu_) {
      if (m.size() != n) throw Error(ErrorKind::Argument, "marginal length does not match kernel size");
    }
    u_.assign(s, Vector<Scalar>::Ones(n));
    phi_.assign(s, Vector<Scalar>::Ones(n));
    psi_.assign(s, Vector<Scalar>::Ones(n));
    refresh_suffixes();
  }

  /// One full sweep u_σ <- μ_σ ⊘ (φ_σ ⊙ ψ_σ), σ = 1..s.
  SweepRecord<Scalar> sweep() {
    const std::size_t s = u_.size();
    ++sweeps_;
    SweepRecord<Scalar> rec;
    rec.hilbert_distances.resize(static_cast<Eigen::Index>(s));
    rec.marginal_l1_errors.resize(static_cast<Eigen::Index>(s));

    Vector<Scalar> phi = Vector<Scalar>::Ones(kernel_.points());
    for (std::size_t k = 0; k < s; ++k) {
      if (recompute_) {
        phi = prefix_product(kernel_, u_, k);
        psi_[k] = suffix_product(kernel_, u_, k);
      }
      Vector<Scalar> next = mu_[k].cwiseQuotient(phi.cwiseProduct(psi_[k]));
      if (!next.allFinite() || !(next.array() > Scalar(0)).all()) {
        throw Error(ErrorKind::Numerical, "scaling vector of snapshot " + std::to_string(k + 1) +
                                              " became non-finite or zero in sweep " +
                                              std::to_string(sweeps_));
      }
      rec.hilbert_distances(static_cast<Eigen::Index>(k)) = hilbert_distance(next, u_[k]);
      u_[k] = std::move(next);
      phi_[k] = phi;
      if (!recompute_ && k + 1 < s) {
        phi = kernel_.matrices[k].transpose() * phi.cwiseProduct(u_[k]);
      }
    }
    if (recompute_) {
      for (std::size_t k = 0; k < s; ++k) psi_[k] = suffix_product(kernel_, u_, k);
    } else {
      refresh_suffixes();
    }
    for (std::size_t k = 0; k < s; ++k) {
      rec.marginal_l1_errors(static_cast<Eigen::Index>(k)) =
          (phi_[k].cwiseProduct(u_[k]).cwiseProduct(psi_[k]) - mu_[k]).template lpNorm<1>();
    }
    return rec;
  }

  const ScalingVectors<Scalar>& scalings() const { return u_; }
  const KernelChain<Scalar>& kernel() const { return kernel_; }
  std::size_t sweeps() const { return sweeps_; }

  KernelChain<Scalar> release_kernel() { return std::move(kernel_); }

 private:
  void refresh_suffixes() {
    const std::size_t s = u_.size();
    psi_[s - 1].setOnes();
    for (std::size_t j = s - 1; j > 0; --j) {
      psi_[j - 1] = kernel_.matrices[j - 1] * u_[j].cwiseProduct(psi_[j]);
    }
  }

  KernelChain<Scalar> kernel_;
  std::vector<Vector<Scalar>> mu_;
  ScalingVectors<Scalar> u_;
  std::vector<Vector<Scalar>> phi_;
  std::vector<Vector<Scalar>> psi_;
  bool recompute_;
  std::size_t sweeps_ = 0;
};

template <typename Scalar>
std::vector<Vector<Scalar>> marginal_weights(const SnapshotSequence& seq) {
  std::vector<Vector<Scalar>> mu;
  mu.reserve(seq.size());
  for (const auto& w : seq.weights) mu.push_back(w.template cast<Scalar>());
  return mu;
}

/// Solves the discrete bridge for `seq` (expected already in solver
/// coordinates; `transform` is recorded for mapping predictions back).
template <typename Scalar = double>
BridgeSolution<Scalar> sinkhorn_solve(const SnapshotSequence& seq, const SolverConfig& cfg,
                                      AffineTransform transform = {}) {
  validate(seq);
  validate(cfg);
  if (transform.dimension() == 0) transform = AffineTransform::identity(seq.dimension());

  const auto start = std::chrono::steady_clock::now();
  PathSinkhorn<Scalar> solver(build_kernel_chain(build_cost_chain<Scalar>(seq), cfg),
                              marginal_weights<Scalar>(seq), cfg.recompute_products);

  BridgeSolution<Scalar> sol;
  sol.marginals = seq;
  sol.transform = std::move(transform);
  const Scalar tol = static_cast<Scalar>(cfg.tolerance);
  for (int it = 0; it < cfg.max_iterations; ++it) {
    SweepRecord<Scalar> rec = solver.sweep();
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const Scalar err = rec.marginal_l1_errors.maxCoeff();
    sol.diagnostics.push_back(std::move(rec));
    if (err <= tol) {
      sol.converged = true;
      break;
    }
  }
  sol.scalings = solver.scalings();
  sol.kernel = solver.release_kernel();
  if (!sol.converged) {
    const Scalar err = sol.diagnostics.back().marginal_l1_errors.maxCoeff();
    throw NonConvergenceError<Scalar>(
        "Sinkhorn did not reach tolerance " + std::to_string(cfg.tolerance) + " within " +
            std::to_string(cfg.max_iterations) + " sweeps (max L1 error " +
            std::to_string(static_cast<double>(err)) + ")",
        std::move(sol));
  }
  return sol;
}

/// proj_σ(K ⊙ U), σ 0-based.
template <typename Scalar>
Vector<Scalar> project_marginal(const BridgeSolution<Scalar>& sol, std::size_t sigma) {
  if (sigma >= sol.snapshots()) {
    throw Error(ErrorKind::OutOfRange, "snapshot index " + std::to_string(sigma + 1) +
                                           " outside 1.." + std::to_string(sol.snapshots()));
  }
  return prefix_product(sol.kernel, sol.scalings, sigma)
      .cwiseProduct(sol.scalings[sigma])
      .cwiseProduct(suffix_product(sol.kernel, sol.scalings, sigma));
}

/// proj_{σ1,σ2}(K ⊙ U) =
///   diag(φ_σ1 ⊙ u_σ1) K_σ1 diag(u_σ1+1) ... K_σ2−1 diag(u_σ2 ⊙ ψ_σ2), σ 0-based.
template <typename Scalar>
Matrix<Scalar> project_pair(const BridgeSolution<Scalar>& sol, std::size_t first,
                            std::size_t second) {
  const std::size_t s = sol.snapshots();
  if (!(first < second) || second >= s) {
    throw Error(ErrorKind::Argument, "project_pair needs 1 ≤ σ1 < σ2 ≤ s, got (" +
                                         std::to_string(first + 1) + ", " +
                                         std::to_string(second + 1) + ")");
  }
  const Vector<Scalar> left =
      prefix_product(sol.kernel, sol.scalings, first).cwiseProduct(sol.scalings[first]);
  const Vector<Scalar> right =
      sol.scalings[second].cwiseProduct(suffix_product(sol.kernel, sol.scalings, second));
  Matrix<Scalar> plan = left.asDiagonal() * sol.kernel.matrices[first];
  for (std::size_t j = first + 1; j < second; ++j) {
    plan = (plan * sol.scalings[j].asDiagonal()) * sol.kernel.matrices[j];
  }
  return plan * right.asDiagonal();
}

template <typename Scalar>
struct ObjectiveTerms {
  Scalar transport;  // Σ_σ ⟨C_σ, M^{σ→σ+1}⟩ in scaled cost units
  Scalar entropy;    // ε ⟨log M, M⟩
  Scalar total() const { return transport + entropy; }
};

/// ⟨C + ε log M, M⟩ for M = K ⊙ U, with C the scaled cost the kernel was
/// built from. Uses log M = −C/ε + Σ_σ log u_σ on the support of M.
template <typename Scalar>
ObjectiveTerms<Scalar> objective_terms(const BridgeSolution<Scalar>& sol) {
  const std::size_t s = sol.snapshots();
  const Scalar eps = sol.kernel.epsilon;
  const CostChain<Scalar> costs = build_cost_chain<Scalar>(sol.marginals);
  Scalar transport(0);
  for (std::size_t k = 0; k + 1 < s; ++k) {
    transport += costs.matrices[k].cwiseProduct(project_pair(sol, k, k + 1)).sum() /
                 sol.kernel.cost_scale_factor;
  }
  Scalar dual(0);
  for (std::size_t k = 0; k < s; ++k) {
    dual += sol.scalings[k].array().log().matrix().dot(project_marginal(sol, k));
  }
  return {transport, -transport + eps * dual};
}

template <typename Scalar>
Scalar objective_value(const BridgeSolution<Scalar>& sol) {
  return objective_terms(sol).total();
}

}  // namespace mmsb
