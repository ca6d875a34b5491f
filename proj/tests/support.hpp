#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "mmsb/marginals.hpp"

namespace mmsb::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("mmsb_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                                double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  MatrixXd m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = normal(rng);
  return m;
}

inline VectorXd random_simplex(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.2, 1.0);
  VectorXd w(n);
  for (Eigen::Index k = 0; k < n; ++k) w(k) = unit(rng);
  return w / w.sum();
}

/// Random snapshot sequence with s equispaced times in [0, 1].
inline SnapshotSequence random_sequence(Eigen::Index n, std::size_t s, Eigen::Index d,
                                        std::mt19937_64& rng, bool uniform_weights = false) {
  SnapshotSequence seq;
  for (std::size_t k = 0; k < s; ++k) {
    seq.times.push_back(static_cast<double>(k) / static_cast<double>(s - 1));
    seq.supports.push_back(gaussian_matrix(n, d, rng));
    seq.weights.push_back(uniform_weights ? VectorXd::Constant(n, 1.0 / static_cast<double>(n))
                                          : random_simplex(n, rng));
  }
  return seq;
}

inline WeightedParticles random_particles(Eigen::Index m, Eigen::Index d, std::mt19937_64& rng) {
  WeightedParticles p;
  p.points = gaussian_matrix(m, d, rng);
  p.weights = random_simplex(m, rng);
  return p;
}

}  // namespace mmsb::testing
