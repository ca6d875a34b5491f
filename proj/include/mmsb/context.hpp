#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mmsb/types.hpp"

namespace mmsb {

/// Ordered (x, y) samples of a reference curve y(x).
using Polyline = Eigen::Matrix<double, Eigen::Dynamic, 2>;

struct Context {
  std::string id;
  Eigen::Vector2i cyber{1, 1};  // LLC partitions, memory-bandwidth blocks
  Polyline phys;
};

void validate(const Context& c);

struct ContextEntry {
  Context context;
  std::filesystem::path archive_dir;  // solution archive fitted for this context
};

struct ContextLibrary {
  std::vector<ContextEntry> entries;
};

/// Discrete Fréchet distance (Euclidean point metric), O(|a||b|) DP.
double frechet_distance(const Polyline& a, const Polyline& b);

struct ContextWeights {
  double cyber = 1.0;
  double phys = 1.0;
};

struct ContextMatch {
  std::string id;
  double score = 0.0;
  double cyber_distance = 0.0;
  double phys_distance = 0.0;
};

/// Each component is divided by its library maximum (0 if that maximum is 0)
/// and combined as a weighted sum. Ascending score, ties by id.
std::vector<ContextMatch> match_context(const ContextLibrary& lib, const Context& query,
                                        ContextWeights weights = {});

Polyline read_polyline_csv(const std::filesystem::path& file);

/// Manifest: JSON array of {id, cyber: [int, int], phys_file, archive_dir};
/// relative paths resolve against the manifest's directory.
ContextLibrary load_context_library(const std::filesystem::path& manifest);

/// A single {id?, cyber, phys_file} object.
Context load_context(const std::filesystem::path& file);

}  // namespace mmsb
