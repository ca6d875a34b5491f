#pragma once

// Explicit enumeration of the order-s tensor M = K ⊙ (u_1 ⊗ ... ⊗ u_s)
// with K(i_1..i_s) = Π K_σ(i_σ, i_σ+1). Only for tiny n and s.

#include <cmath>
#include <functional>
#include <vector>

#include "mmsb/types.hpp"

namespace mmsb::oracle {

inline void for_each_index(Eigen::Index n, std::size_t s,
                           const std::function<void(const std::vector<Eigen::Index>&)>& f) {
  std::vector<Eigen::Index> idx(s, 0);
  while (true) {
    f(idx);
    std::size_t k = 0;
    while (k < s && ++idx[k] == n) idx[k++] = 0;
    if (k == s) return;
  }
}

inline double tensor_entry(const std::vector<MatrixXd>& kernel, const std::vector<VectorXd>& u,
                           const std::vector<Eigen::Index>& idx) {
  double v = 1.0;
  for (std::size_t k = 0; k < u.size(); ++k) v *= u[k](idx[k]);
  for (std::size_t k = 0; k + 1 < u.size(); ++k) v *= kernel[k](idx[k], idx[k + 1]);
  return v;
}

inline VectorXd tensor_marginal(const std::vector<MatrixXd>& kernel, const std::vector<VectorXd>& u,
                                std::size_t sigma) {
  const Eigen::Index n = u.front().size();
  VectorXd out = VectorXd::Zero(n);
  for_each_index(n, u.size(), [&](const auto& idx) { out(idx[sigma]) += tensor_entry(kernel, u, idx); });
  return out;
}

inline MatrixXd tensor_pair(const std::vector<MatrixXd>& kernel, const std::vector<VectorXd>& u,
                            std::size_t first, std::size_t second) {
  const Eigen::Index n = u.front().size();
  MatrixXd out = MatrixXd::Zero(n, n);
  for_each_index(n, u.size(),
                 [&](const auto& idx) { out(idx[first], idx[second]) += tensor_entry(kernel, u, idx); });
  return out;
}

/// Σ M (C + ε log M) with C(i_1..i_s) = Σ costs_σ(i_σ, i_σ+1).
inline double tensor_objective(const std::vector<MatrixXd>& kernel, const std::vector<VectorXd>& u,
                               const std::vector<MatrixXd>& costs, double epsilon) {
  double total = 0.0;
  for_each_index(u.front().size(), u.size(), [&](const auto& idx) {
    const double m = tensor_entry(kernel, u, idx);
    if (m <= 0.0) return;
    double c = 0.0;
    for (std::size_t k = 0; k + 1 < u.size(); ++k) c += costs[k](idx[k], idx[k + 1]);
    total += m * (c + epsilon * std::log(m));
  });
  return total;
}

}  // namespace mmsb::oracle
