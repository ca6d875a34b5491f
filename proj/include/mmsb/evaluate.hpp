#pragma once

#include <algorithm>
#include <future>
#include <span>
#include <vector>

#include "mmsb/predict.hpp"
#include "mmsb/transport.hpp"

namespace mmsb {

/// Empirical measures observed at query times, in raw units. Unlike a
/// SnapshotSequence this may hold a single time.
struct HeldOutMeasures {
  std::vector<double> times;
  std::vector<WeightedParticles> measures;
  std::vector<int> cycles;      // 1-based cycle of each time (0 if unknown)
  std::vector<int> positions;   // j within the cycle (0 if unknown)
};

struct SuiteEntry {
  double tau = 0.0;
  std::size_t sigma = 0;  // 0-based interval
  double lambda = 0.0;
  double distance = 0.0;
  int cycle = 0;
  int position = 0;
  TransportResult transport;
};

enum class EvaluationUnits { Raw, Standardized };

struct SuiteOptions {
  double prune_threshold = 0.0;
  bool keep_plans = false;
  EvaluationUnits units = EvaluationUnits::Raw;
  double time_match_tolerance = 1e-9;
  int threads = 1;  // queries are scored concurrently; results keep query order
};

/// Predicts at each query time and scores it against the held-out measure
/// at that time with the exact 2-Wasserstein distance.
template <typename Scalar>
std::vector<SuiteEntry> evaluate_prediction_suite(const BridgeSolution<Scalar>& sol,
                                                  const HeldOutMeasures& held_out,
                                                  std::span<const double> query_times,
                                                  const SuiteOptions& opts = {});

std::size_t find_held_out(const HeldOutMeasures& held_out, double tau, double tolerance);

template <typename Scalar>
std::vector<SuiteEntry> evaluate_prediction_suite(const BridgeSolution<Scalar>& sol,
                                                  const HeldOutMeasures& held_out,
                                                  std::span<const double> query_times,
                                                  const SuiteOptions& opts) {
  // Resolve every query up front so a coverage error is raised before any work.
  std::vector<std::size_t> matched;
  for (double tau : query_times) matched.push_back(find_held_out(held_out, tau, opts.time_match_tolerance));

  std::vector<SuiteEntry> out(query_times.size());
  auto score = [&](std::size_t q) {
    const double tau = query_times[q];
    const std::size_t k = matched[q];
    WeightedParticles predicted = predict_distribution(sol, Query{tau, opts.prune_threshold});
    WeightedParticles observed = held_out.measures[k];
    if (opts.units == EvaluationUnits::Standardized) {
      predicted.points = sol.transform.apply(predicted.points);
      observed.points = sol.transform.apply(observed.points);
    }
    const Interval iv = locate_interval(sol.marginals.times, tau);
    SuiteEntry& entry = out[q];
    entry.tau = tau;
    entry.sigma = iv.sigma;
    entry.lambda = iv.lambda;
    entry.cycle = k < held_out.cycles.size() ? held_out.cycles[k] : 0;
    entry.position = k < held_out.positions.size() ? held_out.positions[k] : 0;
    entry.transport = wasserstein(predicted, observed, opts.keep_plans);
    entry.distance = entry.transport.distance;
  };
  const std::size_t workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(opts.threads, 1)), 1, std::max<std::size_t>(out.size(), 1));
  if (workers == 1) {
    for (std::size_t q = 0; q < out.size(); ++q) score(q);
    return out;
  }
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t q = w; q < out.size(); q += workers) score(q);
    }));
  }
  for (auto& j : jobs) j.get();
  return out;
}

}  // namespace mmsb
