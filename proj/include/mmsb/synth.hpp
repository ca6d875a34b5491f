#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmsb/context.hpp"
#include "mmsb/marginals.hpp"

namespace mmsb {

/// Regime-switching synthetic profiles. Each cycle is split into
/// `segments_per_cycle` equal-length segments with their own mean, so
/// `regime_means` has n_c * segments_per_cycle rows.
struct SynthSpec {
  int n = 100;
  int d = 3;
  int n_c = 5;
  std::vector<double> cycle_mean_durations;
  double cycle_jitter_std = 0.0;
  MatrixXd regime_means;
  VectorXd regime_noise_std;
  double sample_period = 0.010;
  std::uint64_t seed = 0;
  int segments_per_cycle = 1;
};

void validate(const SynthSpec& spec);

/// Zero-mean GP draw with covariance variance * exp(-(x - x')^2 / (2 l^2))
/// on an equispaced grid.
Polyline sample_gp_path(double x_min, double x_max, int num_points, double variance,
                        double length_scale, std::uint64_t seed);

ProfileSet generate_profiles(const SynthSpec& spec, int threads = 1);

/// Writes `profiles/<id>.csv` and `cycles.csv` under `dir`.
void write_profile_set(const ProfileSet& ps, const std::filesystem::path& dir);

std::string to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const std::string& text);

}  // namespace mmsb
