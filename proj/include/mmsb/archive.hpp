#pragma once

// On-disk layouts shared by the pipeline steps. Snapshot indices in file
// names and CSV columns are 1-based.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmsb/bridge.hpp"
#include "mmsb/evaluate.hpp"
#include "mmsb/marginals.hpp"

namespace mmsb {

using Json = nlohmann::json;

/// meta.json + snapshot_<σ>.csv. Supports are stored in solver coordinates;
/// `transform` maps raw points to them.
struct SnapshotArchive {
  SnapshotSequence sequence;
  AffineTransform transform;
  bool standardized = false;
  Json meta;
};

void write_snapshot_archive(const std::filesystem::path& dir, const SnapshotSequence& seq,
                            const AffineTransform& transform, bool standardized,
                            const Json& extra = Json::object());
SnapshotArchive read_snapshot_archive(const std::filesystem::path& dir);

/// meta.json (kind "held_out") + held_out_<k>.csv in raw units.
void write_held_out_archive(const std::filesystem::path& dir, const HeldOutMeasures& held,
                            const Json& extra = Json::object());
HeldOutMeasures read_held_out_archive(const std::filesystem::path& dir);

/// `sweep,sigma,hilbert_distance,l1_error`
void write_diagnostics_csv(const std::filesystem::path& file,
                           const std::vector<SweepRecord<double>>& diagnostics);

/// solution.json + u_<σ>.csv + diagnostics.csv. Returns the solution id
/// (leading 16 hex digits of the hash over the scaling files).
std::string write_solution_archive(const std::filesystem::path& dir, const BridgeSolution<double>& sol,
                                   const SolverConfig& cfg, const std::filesystem::path& snapshot_dir,
                                   const Json& extra = Json::object());

struct LoadedSolution {
  BridgeSolution<double> solution;
  SolverConfig config;
  std::string id;
  Json meta;
  Json snapshot_meta;
};

/// Rebuilds the kernel chain from the referenced snapshot archive.
LoadedSolution read_solution_archive(const std::filesystem::path& dir);

/// `i,j,mass` rows (1-based) for the nonzeros of a transport plan.
void write_plan_csv(const std::filesystem::path& file, const Eigen::SparseMatrix<double>& plan);

/// `tau,sigma,lambda,wasserstein_distance`
void write_report_csv(const std::filesystem::path& file, const std::vector<SuiteEntry>& entries);

/// One row per cycle: `s_int,cycle,W_1,...,W_{s_int+1}`.
void write_table_csv(const std::filesystem::path& file, const std::vector<SuiteEntry>& entries,
                     int interior);

Json read_json(const std::filesystem::path& file);
void write_json(const std::filesystem::path& file, const Json& value);

}  // namespace mmsb
