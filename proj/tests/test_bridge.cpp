#include <gtest/gtest.h>

#include <cmath>

#include "mmsb/bridge.hpp"
#include "mmsb/dense_oracle.hpp"
#include "oracles/distance.hpp"
#include "oracles/tensor.hpp"
#include "support.hpp"

using namespace mmsb;

namespace {

SnapshotSequence one_d(const std::vector<std::vector<double>>& points,
                       const std::vector<std::vector<double>>& weights) {
  SnapshotSequence seq;
  for (std::size_t k = 0; k < points.size(); ++k) {
    seq.times.push_back(static_cast<double>(k));
    seq.supports.push_back(Eigen::Map<const VectorXd>(points[k].data(), static_cast<Eigen::Index>(points[k].size())));
    seq.weights.push_back(Eigen::Map<const VectorXd>(weights[k].data(), static_cast<Eigen::Index>(weights[k].size())));
  }
  return seq;
}

BridgeSolution<double> with_random_scalings(const SnapshotSequence& seq, const SolverConfig& cfg,
                                            std::mt19937_64& rng) {
  BridgeSolution<double> sol;
  sol.kernel = build_kernel_chain(build_cost_chain(seq), cfg);
  sol.marginals = seq;
  sol.transform = AffineTransform::identity(seq.dimension());
  std::uniform_real_distribution<double> unit(0.2, 3.0);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    VectorXd u(seq.points());
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = unit(rng);
    sol.scalings.push_back(u);
  }
  return sol;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an mmsb::Error";
  return ErrorKind::Io;
}

SolverConfig config(double eps, CostScale scale = CostScale::Mean, double tol = 1e-10) {
  SolverConfig cfg;
  cfg.epsilon = eps;
  cfg.cost_scale = scale;
  cfg.tolerance = tol;
  return cfg;
}

}  // namespace

TEST(CostChain, OneDimensionalExample) {
  const SnapshotSequence seq = one_d({{0, 3}, {4, 0}}, {{0.5, 0.5}, {0.5, 0.5}});
  const CostChain<double> c = build_cost_chain(seq);
  ASSERT_EQ(c.matrices.size(), 1u);
  MatrixXd expected(2, 2);
  expected << 16, 0, 1, 9;
  EXPECT_EQ(c.matrices[0], expected);
  EXPECT_EQ(c.metric, "sqeuclidean");
}

TEST(CostChain, IdenticalSetsHaveZeroDiagonal) {
  std::mt19937_64 rng(5);
  SnapshotSequence seq = mmsb::testing::random_sequence(6, 3, 3, rng);
  seq.supports[1] = seq.supports[0];
  const CostChain<double> c = build_cost_chain(seq);
  EXPECT_EQ(c.matrices[0].diagonal().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(c.matrices[0].isApprox(c.matrices[0].transpose()));
}

TEST(CostChain, MatchesLoopOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const SnapshotSequence seq = mmsb::testing::random_sequence(4, 4, 3, rng);
    const CostChain<double> c = build_cost_chain(seq);
    for (std::size_t k = 0; k + 1 < seq.size(); ++k) {
      const MatrixXd ref = oracle::squared_distances_loop(seq.supports[k], seq.supports[k + 1]);
      EXPECT_LE((c.matrices[k] - ref).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_GE(c.matrices[k].minCoeff(), 0.0);
    }
  }
}

TEST(KernelChain, ZeroCostGivesOnes) {
  CostChain<double> c;
  c.matrices.push_back(MatrixXd::Zero(3, 3));
  const KernelChain<double> k = build_kernel_chain(c, config(0.1));
  EXPECT_EQ(k.matrices[0], MatrixXd::Ones(3, 3));
  EXPECT_EQ(k.cost_scale_factor, 1.0);
}

TEST(KernelChain, DirectEvaluation) {
  const double eps = 0.3;
  CostChain<double> c;
  MatrixXd m(2, 2);
  m << 0, eps, eps, 0;
  c.matrices.push_back(m);
  const KernelChain<double> k = build_kernel_chain(c, config(eps, CostScale::None));
  MatrixXd expected(2, 2);
  expected << 1, std::exp(-1.0), std::exp(-1.0), 1;
  EXPECT_LE((k.matrices[0] - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(KernelChain, CostScaleFactors) {
  CostChain<double> c;
  MatrixXd a(2, 2), b(2, 2);
  a << 0, 2, 4, 6;
  b << 8, 2, 2, 0;
  c.matrices = {a, b};
  EXPECT_DOUBLE_EQ(build_kernel_chain(c, config(1.0, CostScale::Mean)).cost_scale_factor, 3.0);
  EXPECT_DOUBLE_EQ(build_kernel_chain(c, config(1.0, CostScale::Max)).cost_scale_factor, 8.0);
  const KernelChain<double> k = build_kernel_chain(c, config(1.0, CostScale::Max));
  EXPECT_NEAR(k.matrices[1](0, 0), std::exp(-1.0), 1e-15);
}

TEST(KernelChain, RawCountsUnderflow) {
  const SnapshotSequence seq = one_d({{0, 1e6}, {3e6, -2e6}}, {{0.5, 0.5}, {0.5, 0.5}});
  EXPECT_EQ(kind_of([&] { build_kernel_chain(build_cost_chain(seq), config(0.1, CostScale::None)); }),
            ErrorKind::Underflow);
  EXPECT_NO_THROW(build_kernel_chain(build_cost_chain(seq), config(0.1, CostScale::Mean)));
}

TEST(SolverConfig, Validation) {
  EXPECT_EQ(kind_of([] { validate(config(0.0)); }), ErrorKind::Validation);
  EXPECT_EQ(kind_of([] { validate(config(-1.0)); }), ErrorKind::Validation);
  EXPECT_EQ(kind_of([] { validate(config(0.1, CostScale::Mean, 0.0)); }), ErrorKind::Validation);
  SolverConfig cfg;
  cfg.max_iterations = 0;
  EXPECT_EQ(kind_of([&] { validate(cfg); }), ErrorKind::Validation);
  EXPECT_EQ(parse_cost_scale("max"), CostScale::Max);
  EXPECT_EQ(kind_of([] { parse_cost_scale("median"); }), ErrorKind::Validation);
}

TEST(Solve, ZeroCostGivesProductCoupling) {
  const SnapshotSequence seq = one_d({{1, 1}, {1, 1}}, {{0.5, 0.5}, {0.5, 0.5}});
  const BridgeSolution<double> sol = sinkhorn_solve(seq, config(0.1));
  EXPECT_TRUE(sol.converged);
  EXPECT_LE((project_pair(sol, 0, 1) - MatrixXd::Constant(2, 2, 0.25)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Solve, SinglePointConvergesInOneSweep) {
  for (std::size_t s : {2u, 3u, 7u}) {
    SnapshotSequence seq;
    for (std::size_t k = 0; k < s; ++k) {
      seq.times.push_back(static_cast<double>(k));
      seq.supports.push_back(MatrixXd::Constant(1, 2, static_cast<double>(k)));
      seq.weights.push_back(VectorXd::Ones(1));
    }
    const BridgeSolution<double> sol = sinkhorn_solve(seq, config(0.5));
    EXPECT_EQ(sol.sweeps(), 1u);
    for (std::size_t k = 0; k < s; ++k) EXPECT_NEAR(project_marginal(sol, k)(0), 1.0, 1e-14);
  }
}

TEST(Solve, MatchesDenseOracle) {
  std::mt19937_64 rng(23);
  const SnapshotSequence seq = mmsb::testing::random_sequence(3, 3, 2, rng);
  const SolverConfig cfg = config(0.5);
  const BridgeSolution<double> sol = sinkhorn_solve(seq, cfg);
  const DenseTensor<double> dense = dense_oracle_solve(seq, cfg);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_LE((project_marginal(sol, k) - dense.marginal(k)).cwiseAbs().maxCoeff(), 1e-6);
  }
  EXPECT_LE((project_pair(sol, 0, 2) - dense.pair_marginal(0, 2)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Solve, FeasibilityConsistencyAndMass) {
  std::mt19937_64 rng(29);
  const SnapshotSequence seq = mmsb::testing::random_sequence(12, 5, 3, rng);
  const SolverConfig cfg = config(0.2, CostScale::Mean, 1e-9);
  const BridgeSolution<double> sol = sinkhorn_solve(seq, cfg);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    EXPECT_LE((project_marginal(sol, k) - seq.weights[k]).lpNorm<1>(), cfg.tolerance);
  }
  for (std::size_t a = 0; a < seq.size(); ++a) {
    for (std::size_t b = a + 1; b < seq.size(); ++b) {
      const MatrixXd plan = project_pair(sol, a, b);
      const VectorXd pa = project_marginal(sol, a);
      const VectorXd pb = project_marginal(sol, b);
      EXPECT_LE((plan.rowwise().sum() - pa).cwiseAbs().maxCoeff(), 1e-10 * pa.maxCoeff());
      EXPECT_LE((plan.colwise().sum().transpose() - pb).cwiseAbs().maxCoeff(), 1e-10 * pb.maxCoeff());
      EXPECT_NEAR(plan.sum(), 1.0, 1e-10);
    }
  }
}

TEST(Solve, RecomputedProductsMatchCached) {
  std::mt19937_64 rng(31);
  const SnapshotSequence seq = mmsb::testing::random_sequence(10, 6, 2, rng);
  SolverConfig cfg = config(0.3, CostScale::Mean, 1e-9);
  const BridgeSolution<double> cached = sinkhorn_solve(seq, cfg);
  cfg.recompute_products = true;
  const BridgeSolution<double> fresh = sinkhorn_solve(seq, cfg);
  ASSERT_EQ(cached.sweeps(), fresh.sweeps());
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const double scale = cached.scalings[k].cwiseAbs().maxCoeff();
    EXPECT_LE((cached.scalings[k] - fresh.scalings[k]).cwiseAbs().maxCoeff(), 1e-13 * scale);
  }
}

TEST(Solve, DeterministicRerun) {
  std::mt19937_64 rng(37);
  const SnapshotSequence seq = mmsb::testing::random_sequence(8, 4, 2, rng);
  const BridgeSolution<double> a = sinkhorn_solve(seq, config(0.3));
  const BridgeSolution<double> b = sinkhorn_solve(seq, config(0.3));
  for (std::size_t k = 0; k < seq.size(); ++k) EXPECT_EQ(a.scalings[k], b.scalings[k]);
}

TEST(Solve, NonConvergenceCarriesDiagnostics) {
  std::mt19937_64 rng(41);
  const SnapshotSequence seq = mmsb::testing::random_sequence(20, 5, 2, rng);
  SolverConfig cfg = config(0.05, CostScale::Mean, 1e-14);
  cfg.max_iterations = 3;
  try {
    sinkhorn_solve(seq, cfg);
    FAIL();
  } catch (const NonConvergenceError<double>& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonConvergence);
    EXPECT_EQ(e.partial().sweeps(), 3u);
    EXPECT_FALSE(e.partial().converged);
    EXPECT_EQ(e.partial().diagnostics.back().hilbert_distances.size(), 5);
  }
}

TEST(Solve, SweepDiagnosticsShape) {
  std::mt19937_64 rng(43);
  const SnapshotSequence seq = mmsb::testing::random_sequence(6, 4, 2, rng);
  const BridgeSolution<double> sol = sinkhorn_solve(seq, config(0.3));
  double last_time = 0.0;
  for (const SweepRecord<double>& rec : sol.diagnostics) {
    EXPECT_EQ(rec.hilbert_distances.size(), 4);
    EXPECT_EQ(rec.marginal_l1_errors.size(), 4);
    EXPECT_GE(rec.wall_time, last_time);
    last_time = rec.wall_time;
  }
  EXPECT_LE(sol.diagnostics.back().marginal_l1_errors.maxCoeff(), 1e-10);
}

TEST(ProjectMarginal, AllOnesGivesRowSums) {
  std::mt19937_64 rng(47);
  const SnapshotSequence seq = mmsb::testing::random_sequence(4, 2, 2, rng);
  BridgeSolution<double> sol = with_random_scalings(seq, config(0.7), rng);
  for (auto& u : sol.scalings) u.setOnes();
  EXPECT_LE((project_marginal(sol, 0) - sol.kernel.matrices[0].rowwise().sum()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((project_marginal(sol, 1) - sol.kernel.matrices[0].colwise().sum().transpose()).cwiseAbs().maxCoeff(),
            1e-14);
  EXPECT_EQ(kind_of([&] { project_marginal(sol, 2); }), ErrorKind::OutOfRange);
}

TEST(ProjectMarginal, MatchesTensorEnumeration) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 12; ++trial) {
    const Eigen::Index n = 2 + trial % 3;
    const std::size_t s = 2 + static_cast<std::size_t>(trial % 3);
    const SnapshotSequence seq = mmsb::testing::random_sequence(n, s, 2, rng);
    const BridgeSolution<double> sol = with_random_scalings(seq, config(0.6), rng);
    for (std::size_t k = 0; k < s; ++k) {
      const VectorXd ref = oracle::tensor_marginal(sol.kernel.matrices, sol.scalings, k);
      EXPECT_LE((project_marginal(sol, k) - ref).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, ref.maxCoeff()));
    }
  }
}

TEST(ProjectPair, TwoSnapshotFormula) {
  std::mt19937_64 rng(59);
  const SnapshotSequence seq = mmsb::testing::random_sequence(4, 2, 2, rng);
  const BridgeSolution<double> sol = with_random_scalings(seq, config(0.6), rng);
  const MatrixXd expected = sol.scalings[0].asDiagonal() * sol.kernel.matrices[0] * sol.scalings[1].asDiagonal();
  EXPECT_LE((project_pair(sol, 0, 1) - expected).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(kind_of([&] { project_pair(sol, 1, 1); }), ErrorKind::Argument);
  EXPECT_EQ(kind_of([&] { project_pair(sol, 1, 0); }), ErrorKind::Argument);
  EXPECT_EQ(kind_of([&] { project_pair(sol, 0, 2); }), ErrorKind::Argument);
}

TEST(ProjectPair, MatchesTensorEnumerationAllPairs) {
  std::mt19937_64 rng(61);
  for (Eigen::Index n = 2; n <= 4; ++n) {
    const SnapshotSequence seq = mmsb::testing::random_sequence(n, 4, 3, rng);
    const BridgeSolution<double> sol = with_random_scalings(seq, config(0.8), rng);
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = a + 1; b < 4; ++b) {
        const MatrixXd ref = oracle::tensor_pair(sol.kernel.matrices, sol.scalings, a, b);
        EXPECT_LE((project_pair(sol, a, b) - ref).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, ref.maxCoeff()));
      }
    }
  }
}

TEST(ProjectPair, GaugeInvariance) {
  std::mt19937_64 rng(67);
  const SnapshotSequence seq = mmsb::testing::random_sequence(5, 4, 2, rng);
  const BridgeSolution<double> sol = sinkhorn_solve(seq, config(0.4));
  BridgeSolution<double> scaled = sol;
  scaled.scalings[1] *= 7.5;
  scaled.scalings[3] /= 7.5;
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a + 1; b < 4; ++b) {
      EXPECT_LE((project_pair(sol, a, b) - project_pair(scaled, a, b)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Hilbert, Examples) {
  VectorXd u(3), v(2), w(2);
  u << 0.5, 2.0, 3.0;
  v << 1.0, 2.0;
  w << 2.0, 1.0;
  EXPECT_EQ(hilbert_distance(u, u), 0.0);
  EXPECT_NEAR(hilbert_distance(VectorXd(2.0 * u), u), 0.0, 1e-15);
  EXPECT_NEAR(hilbert_distance(v, w), std::log(4.0), 1e-15);
  EXPECT_NEAR(hilbert_distance(v, w), hilbert_distance(w, v), 1e-15);
  VectorXd z = u;
  z(1) = 0.0;
  EXPECT_EQ(kind_of([&] { hilbert_distance(z, u); }), ErrorKind::Argument);
}

TEST(Objective, ZeroCostUniformPlan) {
  const SnapshotSequence seq = one_d({{2, 2}, {2, 2}}, {{0.5, 0.5}, {0.5, 0.5}});
  const BridgeSolution<double> sol = sinkhorn_solve(seq, config(1.0, CostScale::None));
  EXPECT_NEAR(objective_value(sol), -std::log(4.0), 1e-10);
  EXPECT_NEAR(objective_terms(sol).transport, 0.0, 1e-15);
}

TEST(Objective, MatchesTensorEvaluation) {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 5; ++trial) {
    const SnapshotSequence seq = mmsb::testing::random_sequence(3, 3, 2, rng);
    const SolverConfig cfg = config(0.4, CostScale::Mean, 1e-12);
    const BridgeSolution<double> sol = sinkhorn_solve(seq, cfg);
    std::vector<MatrixXd> costs = build_cost_chain(seq).matrices;
    for (MatrixXd& c : costs) c /= sol.kernel.cost_scale_factor;
    const double ref = oracle::tensor_objective(sol.kernel.matrices, sol.scalings, costs, cfg.epsilon);
    EXPECT_NEAR(objective_value(sol), ref, 1e-8);
  }
}

TEST(Objective, SmallEpsilonApproachesTransport) {
  std::mt19937_64 rng(73);
  const SnapshotSequence seq = mmsb::testing::random_sequence(4, 3, 2, rng);
  double previous_gap = std::numeric_limits<double>::infinity();
  for (double eps : {1.0, 0.1, 0.01}) {
    const BridgeSolution<double> sol = sinkhorn_solve(seq, config(eps, CostScale::Mean, 1e-9));
    const ObjectiveTerms<double> t = objective_terms(sol);
    const double gap = std::abs(t.total() - t.transport);
    EXPECT_LT(gap, previous_gap);
    previous_gap = gap;
  }
}

TEST(DenseOracle, TwoSnapshotsMatchBimarginalSinkhorn) {
  std::mt19937_64 rng(79);
  const SnapshotSequence seq = mmsb::testing::random_sequence(4, 2, 2, rng);
  const SolverConfig cfg = config(0.5, CostScale::Mean, 1e-12);
  const DenseTensor<double> dense = dense_oracle_solve(seq, cfg);
  // Classic alternating scaling on the single kernel.
  const MatrixXd k = build_kernel_chain(build_cost_chain(seq), cfg).matrices[0];
  VectorXd a = VectorXd::Ones(4), b = VectorXd::Ones(4);
  for (int it = 0; it < 10000; ++it) {
    a = seq.weights[0].cwiseQuotient(k * b);
    b = seq.weights[1].cwiseQuotient(k.transpose() * a);
  }
  const MatrixXd plan = a.asDiagonal() * k * b.asDiagonal();
  EXPECT_LE((dense.pair_marginal(0, 1) - plan).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(DenseOracle, RefusesLargeTensors) {
  std::mt19937_64 rng(83);
  const SnapshotSequence seq = mmsb::testing::random_sequence(5, 10, 1, rng);
  EXPECT_EQ(kind_of([&] { dense_oracle_solve(seq, config(0.5)); }), ErrorKind::Refusal);
}

TEST(Solve, FloatScalarInstantiates) {
  std::mt19937_64 rng(89);
  const SnapshotSequence seq = mmsb::testing::random_sequence(5, 3, 2, rng);
  const BridgeSolution<float> sol = sinkhorn_solve<float>(seq, config(0.5, CostScale::Mean, 1e-4));
  EXPECT_TRUE(sol.converged);
  EXPECT_NEAR(project_pair(sol, 0, 2).sum(), 1.0f, 1e-4f);
}
