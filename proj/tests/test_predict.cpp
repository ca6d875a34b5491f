#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "mmsb/predict.hpp"
#include "support.hpp"

using namespace mmsb;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an mmsb::Error";
  return ErrorKind::Io;
}

BridgeSolution<double> toy_bridge() {
  BridgeSolution<double> sol;
  sol.marginals.times = {0.0, 1.0};
  MatrixXd a(2, 1), b(2, 1);
  a << 0.0, 10.0;
  b << 2.0, 14.0;
  sol.marginals.supports = {a, b};
  sol.marginals.weights = {VectorXd::Constant(2, 0.5), VectorXd::Constant(2, 0.5)};
  sol.transform = AffineTransform::identity(1);
  sol.kernel.matrices = {MatrixXd::Identity(2, 2)};
  sol.scalings = {VectorXd::Constant(2, 0.5), VectorXd::Ones(2)};
  sol.converged = true;
  return sol;
}

struct Solved {
  SnapshotSequence raw;
  BridgeSolution<double> sol;
};

Solved solved_bridge(std::uint64_t seed, Eigen::Index n = 6, std::size_t s = 4) {
  std::mt19937_64 rng(seed);
  Solved out;
  out.raw = mmsb::testing::random_sequence(n, s, 2, rng);
  for (MatrixXd& x : out.raw.supports) x = (x.array() * 50.0 + 300.0).matrix();
  const auto [standardized, t] = standardize(out.raw);
  SolverConfig cfg;
  cfg.epsilon = 0.3;
  cfg.tolerance = 1e-11;
  out.sol = sinkhorn_solve(standardized, cfg);
  out.sol.transform = t;
  return out;
}

}  // namespace

TEST(LocateInterval, Examples) {
  const std::vector<double> times = {0.0, 1.0, 2.0, 4.0, 5.0};
  Interval iv = locate_interval(times, 2.0);
  EXPECT_EQ(iv.sigma, 2u);
  EXPECT_EQ(iv.lambda, 0.0);
  iv = locate_interval(times, 5.0);
  EXPECT_EQ(iv.sigma, 3u);
  EXPECT_EQ(iv.lambda, 1.0);
  iv = locate_interval(times, 1.5);
  EXPECT_EQ(iv.sigma, 1u);
  EXPECT_DOUBLE_EQ(iv.lambda, 0.5);
  iv = locate_interval(times, 3.0);
  EXPECT_EQ(iv.sigma, 2u);
  EXPECT_DOUBLE_EQ(iv.lambda, 0.5);
  iv = locate_interval(times, 0.0);
  EXPECT_EQ(iv.sigma, 0u);
  EXPECT_EQ(iv.lambda, 0.0);
}

TEST(LocateInterval, OutOfRange) {
  const std::vector<double> times = {0.0, 1.0, 2.0};
  EXPECT_EQ(kind_of([&] { locate_interval(times, -1e-9); }), ErrorKind::OutOfRange);
  EXPECT_EQ(kind_of([&] { locate_interval(times, 2.0 + 1e-9); }), ErrorKind::OutOfRange);
}

TEST(Predict, ToyPlanMidpoints) {
  const WeightedParticles p = predict_distribution(toy_bridge(), Query{0.5, 0.0});
  ASSERT_EQ(p.size(), 4);
  EXPECT_NEAR(p.points(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(p.weights(0), 0.5, 1e-15);
  EXPECT_NEAR(p.points(3, 0), 12.0, 1e-15);
  EXPECT_NEAR(p.weights(3), 0.5, 1e-15);
  EXPECT_EQ(p.weights(1), 0.0);
  EXPECT_EQ(p.weights(2), 0.0);

  const WeightedParticles pruned = predict_distribution(toy_bridge(), Query{0.5, 0.1});
  ASSERT_EQ(pruned.size(), 2);
  EXPECT_NEAR(pruned.points(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(pruned.points(1, 0), 12.0, 1e-15);
}

TEST(Predict, UnsolvedBridgeIsStateError) {
  BridgeSolution<double> sol = toy_bridge();
  sol.converged = false;
  EXPECT_EQ(kind_of([&] { predict_distribution(sol, Query{0.5, 0.0}); }), ErrorKind::State);
  EXPECT_EQ(kind_of([&] { predict_distribution(toy_bridge(), Query{1.5, 0.0}); }), ErrorKind::OutOfRange);
  EXPECT_EQ(kind_of([&] { predict_distribution(toy_bridge(), Query{0.5, 1.0}); }), ErrorKind::Argument);
}

TEST(Predict, EndpointConsistency) {
  const Solved b = solved_bridge(3);
  const auto n = b.raw.points();
  for (std::size_t sigma = 0; sigma < b.raw.size(); ++sigma) {
    const WeightedParticles p = predict_distribution(b.sol, Query{b.raw.times[sigma], 0.0});
    const bool right = sigma + 1 == b.raw.size();
    VectorXd agg = VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) agg(right ? j : i) += p.weights(i * n + j);
    }
    EXPECT_LE((agg - b.raw.weights[sigma]).cwiseAbs().maxCoeff(), 1e-11 + 1e-9);
    for (Eigen::Index r = 0; r < p.size(); ++r) {
      const Eigen::Index src = right ? r % n : r / n;
      EXPECT_LE((p.points.row(r) - b.raw.supports[sigma].row(src)).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(Predict, AtomsAreAffineInLambda) {
  const Solved b = solved_bridge(5);
  const double t0 = b.raw.times[1];
  const double t1 = b.raw.times[2];
  std::vector<WeightedParticles> runs;
  for (double lam : {0.0, 0.25, 0.5, 0.75}) runs.push_back(predict_distribution(b.sol, Query{t0 + lam * (t1 - t0), 0.0}));
  for (Eigen::Index r = 0; r < runs[0].size(); ++r) {
    const Eigen::RowVectorXd step = runs[1].points.row(r) - runs[0].points.row(r);
    for (std::size_t k = 2; k < runs.size(); ++k) {
      const Eigen::RowVectorXd gap = runs[k].points.row(r) - runs[0].points.row(r) - double(k) * step;
      EXPECT_LE(gap.cwiseAbs().maxCoeff(), 1e-12 * 400.0);
    }
  }
}

TEST(Predict, WeightConservationAndMonotonePruning) {
  const Solved b = solved_bridge(7, 8, 3);
  const double tau = 0.3;
  const WeightedParticles full = predict_distribution(b.sol, Query{tau, 0.0});
  EXPECT_EQ(full.size(), 64);
  EXPECT_NEAR(full.weights.sum(), 1.0, 1e-9);
  const double top = full.weights.maxCoeff();
  Eigen::Index last = full.size();
  for (double frac : {0.001, 0.01, 0.1, 0.3, 0.6, 0.99}) {
    const WeightedParticles p = predict_distribution(b.sol, Query{tau, frac * top});
    EXPECT_NEAR(p.weights.sum(), 1.0, 1e-9);
    EXPECT_LE(p.size(), last);
    last = p.size();
  }
  EXPECT_GE(last, 1);
}

TEST(Predict, OutputInRawUnits) {
  const Solved b = solved_bridge(11);
  const WeightedParticles p = predict_distribution(b.sol, Query{b.raw.times[0], 0.0});
  EXPECT_GT(p.points.mean(), 100.0);
}

TEST(Prune, RemovesEverythingIsError) {
  WeightedParticles p;
  p.points = MatrixXd::Zero(2, 1);
  p.weights = VectorXd::Constant(2, 0.5);
  EXPECT_EQ(kind_of([&] { prune(p, 0.9); }), ErrorKind::Argument);
}

TEST(Summarize, Examples) {
  WeightedParticles one;
  one.points = MatrixXd::Constant(1, 3, 2.5);
  one.weights = VectorXd::Ones(1);
  Moments m = summarize(one);
  EXPECT_EQ(m.mean, VectorXd::Constant(3, 2.5));
  EXPECT_EQ(m.covariance, MatrixXd::Zero(3, 3));

  WeightedParticles two;
  two.points = MatrixXd(2, 1);
  two.points << 0.0, 2.0;
  two.weights = VectorXd::Constant(2, 0.5);
  m = summarize(two);
  EXPECT_DOUBLE_EQ(m.mean(0), 1.0);
  EXPECT_DOUBLE_EQ(m.covariance(0, 0), 1.0);
}

TEST(Summarize, PermutationAndPsd) {
  std::mt19937_64 rng(13);
  const WeightedParticles p = mmsb::testing::random_particles(9, 3, rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(9);
  perm.setIdentity();
  std::shuffle(perm.indices().data(), perm.indices().data() + 9, rng);
  WeightedParticles q;
  q.points = perm * p.points;
  q.weights = perm * p.weights;
  const Moments a = summarize(p);
  const Moments b = summarize(q);
  EXPECT_LE((a.mean - b.mean).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((a.covariance - b.covariance).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((a.covariance - a.covariance.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(a.covariance);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
}
