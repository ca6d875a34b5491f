#include "mmsb/predict.hpp"

#include <sstream>

namespace mmsb {

Interval locate_interval(std::span<const double> times, double tau) {
  if (times.size() < 2) throw Error(ErrorKind::Argument, "need at least two snapshot times");
  const double first = times.front();
  const double last = times.back();
  const double slack = 1e-12 * std::max(1.0, std::abs(last));
  if (!(tau >= first - slack && tau <= last + slack)) {
    std::ostringstream msg;
    msg << "query time " << tau << " outside [" << first << ", " << last << "]";
    throw Error(ErrorKind::OutOfRange, msg.str());
  }
  tau = std::clamp(tau, first, last);
  // First snapshot strictly after tau, capped so the last interval is closed.
  auto upper = std::upper_bound(times.begin(), times.end(), tau);
  std::size_t sigma = static_cast<std::size_t>(upper - times.begin());
  sigma = std::min(sigma, times.size() - 1) - 1;
  const double lambda = (tau - times[sigma]) / (times[sigma + 1] - times[sigma]);
  return {sigma, std::clamp(lambda, 0.0, 1.0)};
}

WeightedParticles prune(WeightedParticles p, double threshold) {
  if (threshold <= 0.0) return p;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p.weights(i) >= threshold) keep.push_back(i);
  }
  if (keep.empty()) {
    throw Error(ErrorKind::Argument, "prune threshold removes every atom");
  }
  WeightedParticles out;
  out.points = p.points(keep, Eigen::all);
  out.weights = p.weights(keep);
  out.weights /= out.weights.sum();
  return out;
}

Moments summarize(const WeightedParticles& p) {
  const double total = p.weights.sum();
  Moments m;
  m.mean = (p.points.transpose() * p.weights) / total;
  const MatrixXd centered = p.points.rowwise() - m.mean.transpose();
  m.covariance = centered.transpose() * (p.weights.asDiagonal() * centered) / total;
  m.covariance = 0.5 * (m.covariance + m.covariance.transpose()).eval();
  return m;
}

}  // namespace mmsb
