#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmsb/types.hpp"

namespace mmsb {

/// One execution run: timestamped d-dimensional resource samples plus the
/// end times of its control cycles. Rows of `values` align with `timestamps`.
struct Profile {
  std::string id;
  VectorXd timestamps;
  MatrixXd values;
  VectorXd cycle_end_times;
};

struct ProfileSet {
  std::vector<Profile> profiles;
  Eigen::Index dimension = 0;

  std::size_t size() const { return profiles.size(); }
  Eigen::Index cycle_count() const {
    return profiles.empty() ? 0 : profiles.front().cycle_end_times.size();
  }
};

/// Throws Error(Validation/Schema) naming the offending profile.
void validate(const ProfileSet& ps);

/// The discrete snapshot marginals: supports[σ] is n x d (one row per
/// profile), weights[σ] lies in the open probability simplex.
struct SnapshotSequence {
  std::vector<double> times;
  std::vector<MatrixXd> supports;
  std::vector<VectorXd> weights;

  std::size_t size() const { return times.size(); }
  Eigen::Index points() const { return supports.empty() ? 0 : supports.front().rows(); }
  Eigen::Index dimension() const { return supports.empty() ? 0 : supports.front().cols(); }
};

void validate(const SnapshotSequence& seq);

struct CycleStatistic {
  double mean = 0.0;
  double stddev = 0.0;
};

struct SnapshotPlan {
  int cycles = 1;
  int interior = 0;  // s_int
  std::vector<double> cycle_mean_end_times;

  /// 1 + n_c (s_int + 1)
  std::size_t snapshot_count() const {
    return 1 + static_cast<std::size_t>(cycles) * static_cast<std::size_t>(interior + 1);
  }

  /// {0} ∪ interior equispaced times ∪ cycle mean end times, ascending.
  std::vector<double> times() const;

  /// Interior query times of one cycle (1-based) used to score predictions:
  /// start + (end - start) j / (s_int + 2), j = 1..s_int+1.
  std::vector<double> query_times(int cycle) const;

  double cycle_start(int cycle) const;
};

/// Parses one profile CSV (`t,xi_1,...,xi_d`). The profile id is the file stem.
Profile read_profile_csv(const std::filesystem::path& file);

/// Reads profile CSVs and a cycles CSV (`profile_id,cycle_index,end_time`)
/// into a validated set ordered by file path. `threads` caps parallel parsing.
ProfileSet ingest_profiles(std::span<const std::filesystem::path> profile_files,
                           const std::filesystem::path& cycles_file, int threads = 1);

/// All `*.csv` files in a directory, sorted by path.
std::vector<std::filesystem::path> list_profile_files(const std::filesystem::path& dir);

std::vector<CycleStatistic> cycle_time_statistics(const ProfileSet& ps);

SnapshotPlan build_snapshot_plan(std::span<const CycleStatistic> stats, int interior);

/// Nearest sample of every profile at each time; rows follow profile order.
/// Equidistant samples resolve to the earlier timestamp.
std::vector<MatrixXd> extract_at_times(const ProfileSet& ps, std::span<const double> times,
                                       double window);

SnapshotSequence extract_snapshots(const ProfileSet& ps, const SnapshotPlan& plan,
                                   double window = 0.005);

/// Pooled per-dimension z-score over all supports. Returns the standardized
/// sequence and the transform mapping raw points to standardized ones.
std::pair<SnapshotSequence, AffineTransform> standardize(const SnapshotSequence& seq);

}  // namespace mmsb
