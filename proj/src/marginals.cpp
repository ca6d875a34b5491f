#include "mmsb/marginals.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <sstream>

#include "mmsb/csv.hpp"
#include "mmsb/error.hpp"

namespace mmsb {

namespace fs = std::filesystem;

void validate(const ProfileSet& ps) {
  if (ps.profiles.empty()) throw Error(ErrorKind::Validation, "profile set is empty");
  if (ps.dimension < 1) throw Error(ErrorKind::Schema, "profile dimension must be positive");
  const Eigen::Index cycles = ps.cycle_count();
  if (cycles < 1) throw Error(ErrorKind::Validation, "profiles need at least one control cycle");
  for (const Profile& p : ps.profiles) {
    if (p.timestamps.size() == 0) {
      throw Error(ErrorKind::Validation, "profile '" + p.id + "' has no samples");
    }
    if (p.values.cols() != ps.dimension || p.values.rows() != p.timestamps.size()) {
      throw Error(ErrorKind::Schema, "profile '" + p.id + "' has dimension " +
                                         std::to_string(p.values.cols()) + ", expected " +
                                         std::to_string(ps.dimension));
    }
    if (!p.values.allFinite() || !p.timestamps.allFinite()) {
      throw Error(ErrorKind::Validation, "profile '" + p.id + "' contains non-finite values");
    }
    for (Eigen::Index k = 1; k < p.timestamps.size(); ++k) {
      if (!(p.timestamps(k) > p.timestamps(k - 1))) {
        throw Error(ErrorKind::Validation,
                    "profile '" + p.id + "': timestamps not strictly increasing at sample " +
                        std::to_string(k + 1));
      }
    }
    if (p.cycle_end_times.size() != cycles) {
      throw Error(ErrorKind::Validation, "profile '" + p.id + "' has " +
                                             std::to_string(p.cycle_end_times.size()) +
                                             " cycles, expected " + std::to_string(cycles));
    }
    for (Eigen::Index c = 0; c < cycles; ++c) {
      const double end = p.cycle_end_times(c);
      if (c > 0 && !(end > p.cycle_end_times(c - 1))) {
        throw Error(ErrorKind::Validation,
                    "profile '" + p.id + "': cycle end times not strictly increasing");
      }
      if (end < p.timestamps(0) || end > p.timestamps(p.timestamps.size() - 1)) {
        throw Error(ErrorKind::Validation, "profile '" + p.id + "': cycle " +
                                               std::to_string(c + 1) +
                                               " ends outside the sampled time range");
      }
    }
  }
}

void validate(const SnapshotSequence& seq) {
  const std::size_t s = seq.size();
  if (s < 2) throw Error(ErrorKind::Validation, "need at least two snapshots");
  if (seq.supports.size() != s || seq.weights.size() != s) {
    throw Error(ErrorKind::Schema, "snapshot times, supports and weights differ in length");
  }
  const Eigen::Index n = seq.points();
  const Eigen::Index d = seq.dimension();
  if (n < 1 || d < 1) throw Error(ErrorKind::Schema, "empty snapshot support");
  for (std::size_t k = 0; k < s; ++k) {
    if (k > 0 && !(seq.times[k] > seq.times[k - 1])) {
      throw Error(ErrorKind::Validation, "snapshot times not strictly increasing");
    }
    if (seq.supports[k].rows() != n || seq.supports[k].cols() != d) {
      throw Error(ErrorKind::Schema, "snapshot " + std::to_string(k + 1) + " has shape " +
                                         std::to_string(seq.supports[k].rows()) + "x" +
                                         std::to_string(seq.supports[k].cols()));
    }
    if (!seq.supports[k].allFinite()) {
      throw Error(ErrorKind::Validation, "snapshot " + std::to_string(k + 1) + " is not finite");
    }
    const VectorXd& w = seq.weights[k];
    if (w.size() != n || (w.array() <= 0.0).any() || std::abs(w.sum() - 1.0) > 1e-12) {
      throw Error(ErrorKind::Validation,
                  "snapshot " + std::to_string(k + 1) + " weights are not a positive probability vector");
    }
  }
}

std::vector<double> SnapshotPlan::times() const {
  std::vector<double> out;
  out.reserve(snapshot_count());
  out.push_back(0.0);
  double start = 0.0;
  for (double end : cycle_mean_end_times) {
    for (int k = 1; k <= interior; ++k) {
      out.push_back(start + (end - start) * k / static_cast<double>(interior + 1));
    }
    out.push_back(end);
    start = end;
  }
  return out;
}

double SnapshotPlan::cycle_start(int cycle) const {
  return cycle <= 1 ? 0.0 : cycle_mean_end_times.at(static_cast<std::size_t>(cycle - 2));
}

std::vector<double> SnapshotPlan::query_times(int cycle) const {
  if (cycle < 1 || cycle > cycles) {
    throw Error(ErrorKind::Argument, "cycle " + std::to_string(cycle) + " out of range 1.." +
                                         std::to_string(cycles));
  }
  const double start = cycle_start(cycle);
  const double end = cycle_mean_end_times.at(static_cast<std::size_t>(cycle - 1));
  std::vector<double> out;
  for (int j = 1; j <= interior + 1; ++j) {
    out.push_back(start + (end - start) / static_cast<double>(interior + 2) * j);
  }
  return out;
}

Profile read_profile_csv(const fs::path& file) {
  const csv::Table table = csv::read(file);
  const auto cols = static_cast<Eigen::Index>(table.header.size());
  if (cols < 2 || table.header[0] != "t") {
    throw Error(ErrorKind::Schema, file.string() + ": expected header t,xi_1,...,xi_d");
  }
  for (Eigen::Index k = 1; k < cols; ++k) {
    if (table.header[k] != "xi_" + std::to_string(k)) {
      throw Error(ErrorKind::Schema, file.string() + ": unexpected column '" + table.header[k] + "'");
    }
  }
  Profile p;
  p.id = file.stem().string();
  const auto rows = static_cast<Eigen::Index>(table.rows.size());
  if (rows == 0) throw Error(ErrorKind::Validation, "profile '" + p.id + "' has no samples");
  p.timestamps.resize(rows);
  p.values.resize(rows, cols - 1);
  for (Eigen::Index r = 0; r < rows; ++r) {
    p.timestamps(r) = csv::parse_double(table.rows[r][0], table, r);
    for (Eigen::Index k = 1; k < cols; ++k) {
      p.values(r, k - 1) = csv::parse_double(table.rows[r][k], table, r);
    }
  }
  return p;
}

std::vector<fs::path> list_profile_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

ProfileSet ingest_profiles(std::span<const fs::path> profile_files, const fs::path& cycles_file,
                           int threads) {
  if (profile_files.size() < 2) {
    throw Error(ErrorKind::Validation, "need at least two profiles, got " +
                                           std::to_string(profile_files.size()));
  }
  std::vector<fs::path> files(profile_files.begin(), profile_files.end());
  std::sort(files.begin(), files.end());

  ProfileSet ps;
  ps.profiles.resize(files.size());
  const std::size_t workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, files.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < files.size(); ++i) ps.profiles[i] = read_profile_csv(files[i]);
  } else {
    // Strided partition; every slot is written by exactly one worker.
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w) {
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < files.size(); i += workers) {
          ps.profiles[i] = read_profile_csv(files[i]);
        }
      }));
    }
    for (auto& job : jobs) job.get();
  }

  ps.dimension = ps.profiles.front().values.cols();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ps.profiles.size(); ++i) {
    const Profile& p = ps.profiles[i];
    if (p.values.cols() != ps.dimension) {
      throw Error(ErrorKind::Schema, "profile '" + p.id + "' has dimension " +
                                         std::to_string(p.values.cols()) + ", expected " +
                                         std::to_string(ps.dimension));
    }
    if (!index.emplace(p.id, i).second) {
      throw Error(ErrorKind::Validation, "duplicate profile id '" + p.id + "'");
    }
  }

  const csv::Table cycles = csv::read(cycles_file);
  if (cycles.header != std::vector<std::string>{"profile_id", "cycle_index", "end_time"}) {
    throw Error(ErrorKind::Schema, cycles_file.string() +
                                       ": expected header profile_id,cycle_index,end_time");
  }
  std::vector<std::map<long long, double>> ends(ps.profiles.size());
  for (std::size_t r = 0; r < cycles.rows.size(); ++r) {
    const auto& row = cycles.rows[r];
    auto it = index.find(row[0]);
    if (it == index.end()) continue;  // cycles of profiles not being ingested
    const long long c = csv::parse_int(row[1], cycles, r);
    const double end = csv::parse_double(row[2], cycles, r);
    if (c < 1) {
      throw Error(ErrorKind::Parse, cycles.source + ":" + std::to_string(cycles.line_numbers[r]) +
                                        ": cycle_index is 1-based");
    }
    if (!ends[it->second].emplace(c, end).second) {
      throw Error(ErrorKind::Validation, "profile '" + row[0] + "' lists cycle " +
                                             std::to_string(c) + " twice");
    }
  }
  for (std::size_t i = 0; i < ps.profiles.size(); ++i) {
    const auto& m = ends[i];
    Profile& p = ps.profiles[i];
    if (m.empty()) throw Error(ErrorKind::Validation, "profile '" + p.id + "' has no cycle rows");
    const auto count = static_cast<long long>(m.size());
    if (m.rbegin()->first != count) {
      throw Error(ErrorKind::Validation, "profile '" + p.id + "' is missing cycle rows");
    }
    p.cycle_end_times.resize(count);
    for (const auto& [c, end] : m) p.cycle_end_times(c - 1) = end;
  }
  validate(ps);
  return ps;
}

std::vector<CycleStatistic> cycle_time_statistics(const ProfileSet& ps) {
  const std::size_t n = ps.size();
  if (n < 2) {
    throw Error(ErrorKind::InsufficientData, "cycle statistics need at least two profiles");
  }
  const Eigen::Index cycles = ps.cycle_count();
  MatrixXd ends(static_cast<Eigen::Index>(n), cycles);
  for (std::size_t i = 0; i < n; ++i) {
    ends.row(static_cast<Eigen::Index>(i)) = ps.profiles[i].cycle_end_times.transpose();
  }
  // Shifted by the first profile so identical end times give exact results.
  const Eigen::RowVectorXd pivot = ends.row(0);
  const MatrixXd shifted = ends.rowwise() - pivot;
  const Eigen::RowVectorXd offset = shifted.colwise().mean();
  const Eigen::RowVectorXd var =
      (shifted.rowwise() - offset).colwise().squaredNorm() / static_cast<double>(n - 1);
  std::vector<CycleStatistic> out(static_cast<std::size_t>(cycles));
  for (Eigen::Index c = 0; c < cycles; ++c) out[c] = {pivot(c) + offset(c), std::sqrt(var(c))};
  return out;
}

SnapshotPlan build_snapshot_plan(std::span<const CycleStatistic> stats, int interior) {
  if (stats.empty()) throw Error(ErrorKind::Validation, "no cycle statistics");
  if (interior < 0) throw Error(ErrorKind::Argument, "s_int must be nonnegative");
  SnapshotPlan plan;
  plan.cycles = static_cast<int>(stats.size());
  plan.interior = interior;
  double previous = 0.0;
  for (const CycleStatistic& st : stats) {
    if (!(st.mean > previous)) {
      throw Error(ErrorKind::Validation,
                  "cycle mean end times must be positive and strictly increasing");
    }
    plan.cycle_mean_end_times.push_back(st.mean);
    previous = st.mean;
  }
  return plan;
}

std::vector<MatrixXd> extract_at_times(const ProfileSet& ps, std::span<const double> times,
                                       double window) {
  if (!(window > 0.0)) throw Error(ErrorKind::Argument, "window must be positive");
  const auto n = static_cast<Eigen::Index>(ps.size());
  std::vector<MatrixXd> supports(times.size(), MatrixXd(n, ps.dimension));
  std::ostringstream gaps;
  std::size_t gap_count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Profile& p = ps.profiles[static_cast<std::size_t>(i)];
    const double* begin = p.timestamps.data();
    const double* end = begin + p.timestamps.size();
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double tau = times[k];
      const double* hi = std::lower_bound(begin, end, tau);
      const double* best = hi;
      if (hi == end) {
        best = hi - 1;
      } else if (hi != begin && (tau - *(hi - 1)) <= (*hi - tau)) {
        best = hi - 1;  // ties go to the earlier sample
      }
      const double gap = std::abs(*best - tau);
      if (gap > window) {
        if (gap_count++ < 20) {
          gaps << "\n  profile '" << p.id << "', snapshot " << (k + 1) << " (t=" << tau
               << "): nearest sample " << gap << " s away";
        }
        continue;
      }
      supports[k].row(i) = p.values.row(best - begin);
    }
  }
  if (gap_count > 0) {
    throw Error(ErrorKind::Coverage, std::to_string(gap_count) +
                                         " (profile, snapshot) pairs lack a sample within " +
                                         std::to_string(window) + " s:" + gaps.str() +
                                         (gap_count > 20 ? "\n  ..." : ""));
  }
  return supports;
}

SnapshotSequence extract_snapshots(const ProfileSet& ps, const SnapshotPlan& plan, double window) {
  validate(ps);
  if (ps.size() < 1) throw Error(ErrorKind::Validation, "no profiles");
  SnapshotSequence seq;
  seq.times = plan.times();
  const double origin = seq.times.front();
  seq.supports = extract_at_times(ps, seq.times, window);
  for (double& t : seq.times) t -= origin;
  const auto n = static_cast<Eigen::Index>(ps.size());
  seq.weights.assign(seq.times.size(), VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
  return seq;
}

std::pair<SnapshotSequence, AffineTransform> standardize(const SnapshotSequence& seq) {
  const Eigen::Index d = seq.dimension();
  Eigen::Index total = 0;
  VectorXd sum = VectorXd::Zero(d);
  for (const MatrixXd& x : seq.supports) {
    sum += x.colwise().sum().transpose();
    total += x.rows();
  }
  if (total == 0) throw Error(ErrorKind::Validation, "no samples to standardize");
  const VectorXd mean = sum / static_cast<double>(total);
  VectorXd sq = VectorXd::Zero(d);
  for (const MatrixXd& x : seq.supports) {
    sq += (x.rowwise() - mean.transpose()).colwise().squaredNorm().transpose();
  }
  const VectorXd stddev = (sq / static_cast<double>(total)).cwiseSqrt();
  for (Eigen::Index k = 0; k < d; ++k) {
    if (!(stddev(k) > 0.0)) {
      throw Error(ErrorKind::DegenerateDimension,
                  "dimension " + std::to_string(k + 1) + " has zero pooled standard deviation");
    }
  }
  AffineTransform transform{mean, stddev};
  SnapshotSequence out = seq;
  for (MatrixXd& x : out.supports) x = transform.apply(x);
  return {std::move(out), std::move(transform)};
}

}  // namespace mmsb
