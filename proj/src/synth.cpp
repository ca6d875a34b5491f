#include "mmsb/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <future>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "mmsb/csv.hpp"
#include "mmsb/error.hpp"

namespace mmsb {

namespace fs = std::filesystem;
using nlohmann::json;

void validate(const SynthSpec& spec) {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::Validation, "synth spec: " + what); };
  if (spec.n < 1) fail("n must be >= 1");
  if (spec.d < 1) fail("d must be >= 1");
  if (spec.n_c < 1) fail("n_c must be >= 1");
  if (spec.segments_per_cycle < 1) fail("segments_per_cycle must be >= 1");
  if (spec.cycle_mean_durations.size() != static_cast<std::size_t>(spec.n_c)) {
    fail("cycle_mean_durations needs n_c entries");
  }
  for (double v : spec.cycle_mean_durations) {
    if (!(v > 0.0)) fail("cycle durations must be positive");
  }
  if (!(spec.cycle_jitter_std >= 0.0)) fail("cycle_jitter_std must be nonnegative");
  if (!(spec.sample_period > 0.0)) fail("sample_period must be positive");
  if (spec.regime_means.rows() != spec.n_c * spec.segments_per_cycle || spec.regime_means.cols() != spec.d) {
    fail("regime_means must be (n_c * segments_per_cycle) x d");
  }
  if (!spec.regime_means.allFinite()) fail("regime_means must be finite");
  if (spec.regime_noise_std.size() != spec.d) fail("regime_noise_std needs d entries");
  if (!(spec.regime_noise_std.array() >= 0.0).all()) fail("regime_noise_std must be nonnegative");
}

Polyline sample_gp_path(double x_min, double x_max, int num_points, double variance,
                        double length_scale, std::uint64_t seed) {
  if (!(x_max > x_min)) throw Error(ErrorKind::Argument, "sample_gp_path: need x_max > x_min");
  if (num_points < 2) throw Error(ErrorKind::Argument, "sample_gp_path: need at least 2 points");
  if (!(variance > 0.0) || !(length_scale > 0.0)) {
    throw Error(ErrorKind::Argument, "sample_gp_path: variance and length scale must be positive");
  }
  const VectorXd x = VectorXd::LinSpaced(num_points, x_min, x_max);
  MatrixXd cov(num_points, num_points);
  for (int i = 0; i < num_points; ++i) {
    for (int j = 0; j < num_points; ++j) {
      const double r = (x(i) - x(j)) / length_scale;
      cov(i, j) = variance * std::exp(-0.5 * r * r);
    }
  }
  Eigen::LLT<MatrixXd> llt;
  double jitter = 1e-12 * variance;
  bool ok = false;
  for (int attempt = 0; attempt < 12 && !ok; ++attempt, jitter *= 10.0) {
    MatrixXd stabilized = cov;
    stabilized.diagonal().array() += jitter;
    llt.compute(stabilized);
    ok = llt.info() == Eigen::Success;
  }
  if (!ok) throw Error(ErrorKind::Numerical, "sample_gp_path: covariance factorization failed");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  VectorXd z(num_points);
  for (int i = 0; i < num_points; ++i) z(i) = normal(rng);
  Polyline path(num_points, 2);
  path.col(0) = x;
  path.col(1) = llt.matrixL() * z;
  return path;
}

namespace {

VectorXd draw_end_times(const SynthSpec& spec, const VectorXd& cumulative, std::mt19937_64& rng,
                        const std::string& id) {
  std::normal_distribution<double> normal;
  VectorXd ends(spec.n_c);
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (int k = 0; k < spec.n_c; ++k) ends(k) = cumulative(k) + spec.cycle_jitter_std * normal(rng);
    bool increasing = ends(0) > 0.0;
    for (int k = 1; k < spec.n_c && increasing; ++k) increasing = ends(k) > ends(k - 1);
    if (increasing) return ends;
  }
  throw Error(ErrorKind::Generation,
              "profile '" + id + "': cycle end times not increasing after 100 redraws");
}

std::string profile_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "profile_%04d", index);
  return buf;
}

Profile generate_one(const SynthSpec& spec, int index, const VectorXd& cumulative, double horizon) {
  Profile p;
  p.id = profile_id(index);
  std::mt19937_64 rng(spec.seed ^ static_cast<std::uint64_t>(index));
  p.cycle_end_times = draw_end_times(spec, cumulative, rng, p.id);

  const double stop = std::max(horizon, p.cycle_end_times(spec.n_c - 1));
  const auto count = static_cast<Eigen::Index>(std::ceil(stop / spec.sample_period)) + 1;
  p.timestamps.resize(count);
  p.values.resize(count, spec.d);
  std::normal_distribution<double> normal;
  int cycle = 0;
  for (Eigen::Index k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) * spec.sample_period;
    p.timestamps(k) = t;
    while (cycle + 1 < spec.n_c && t > p.cycle_end_times(cycle)) ++cycle;
    const double start = cycle == 0 ? 0.0 : p.cycle_end_times(cycle - 1);
    const double frac = (t - start) / (p.cycle_end_times(cycle) - start);
    const int segment =
        std::clamp(static_cast<int>(std::floor(frac * spec.segments_per_cycle)), 0, spec.segments_per_cycle - 1);
    const auto row = static_cast<Eigen::Index>(cycle * spec.segments_per_cycle + segment);
    for (int j = 0; j < spec.d; ++j) {
      p.values(k, j) = spec.regime_means(row, j) + spec.regime_noise_std(j) * normal(rng);
    }
  }
  return p;
}

}  // namespace

ProfileSet generate_profiles(const SynthSpec& spec, int threads) {
  validate(spec);
  VectorXd cumulative(spec.n_c);
  double acc = 0.0;
  for (int k = 0; k < spec.n_c; ++k) cumulative(k) = acc += spec.cycle_mean_durations[static_cast<std::size_t>(k)];
  // Common sampling horizon well past the mean last end time, so snapshots
  // at cycle means are covered even for profiles that finish early.
  const double horizon = acc + 4.0 * spec.cycle_jitter_std + spec.sample_period;

  ProfileSet ps;
  ps.dimension = spec.d;
  ps.profiles.resize(static_cast<std::size_t>(spec.n));
  const int workers = std::clamp(threads, 1, spec.n);
  std::vector<std::future<void>> jobs;
  for (int w = 0; w < workers; ++w) {
    jobs.push_back(std::async(workers == 1 ? std::launch::deferred : std::launch::async, [&, w] {
      for (int i = w; i < spec.n; i += workers) {
        ps.profiles[static_cast<std::size_t>(i)] = generate_one(spec, i, cumulative, horizon);
      }
    }));
  }
  for (auto& j : jobs) j.get();
  validate(ps);
  return ps;
}

void write_profile_set(const ProfileSet& ps, const fs::path& dir) {
  fs::create_directories(dir / "profiles");
  for (const Profile& p : ps.profiles) {
    std::string out = "t," + csv::point_header(ps.dimension) + "\n";
    for (Eigen::Index k = 0; k < p.timestamps.size(); ++k) {
      out += csv::format(p.timestamps(k));
      for (Eigen::Index j = 0; j < p.values.cols(); ++j) {
        out += ',';
        out += csv::format(p.values(k, j));
      }
      out += '\n';
    }
    csv::write_text(dir / "profiles" / (p.id + ".csv"), out);
  }
  std::string cycles = "profile_id,cycle_index,end_time\n";
  for (const Profile& p : ps.profiles) {
    for (Eigen::Index k = 0; k < p.cycle_end_times.size(); ++k) {
      cycles += p.id + "," + std::to_string(k + 1) + "," + csv::format(p.cycle_end_times(k)) + "\n";
    }
  }
  csv::write_text(dir / "cycles.csv", cycles);
}

std::string to_json(const SynthSpec& spec) {
  json means = json::array();
  for (Eigen::Index r = 0; r < spec.regime_means.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < spec.regime_means.cols(); ++c) row.push_back(spec.regime_means(r, c));
    means.push_back(row);
  }
  json j;
  j["n"] = spec.n;
  j["d"] = spec.d;
  j["n_c"] = spec.n_c;
  j["cycle_mean_durations"] = spec.cycle_mean_durations;
  j["cycle_jitter_std"] = spec.cycle_jitter_std;
  j["regime_means"] = means;
  j["regime_noise_std"] = std::vector<double>(spec.regime_noise_std.data(),
                                              spec.regime_noise_std.data() + spec.regime_noise_std.size());
  j["sample_period"] = spec.sample_period;
  j["seed"] = spec.seed;
  j["segments_per_cycle"] = spec.segments_per_cycle;
  return j.dump(2);
}

SynthSpec synth_spec_from_json(const std::string& text) {
  SynthSpec spec;
  try {
    const json j = json::parse(text);
    spec.n = j.at("n").get<int>();
    spec.d = j.at("d").get<int>();
    spec.n_c = j.at("n_c").get<int>();
    spec.cycle_mean_durations = j.at("cycle_mean_durations").get<std::vector<double>>();
    spec.cycle_jitter_std = j.value("cycle_jitter_std", 0.0);
    spec.sample_period = j.value("sample_period", 0.010);
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.segments_per_cycle = j.value("segments_per_cycle", 1);
    const auto rows = j.at("regime_means").get<std::vector<std::vector<double>>>();
    spec.regime_means.resize(static_cast<Eigen::Index>(rows.size()), spec.d);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != static_cast<std::size_t>(spec.d)) {
        throw Error(ErrorKind::Schema, "synth spec: regime_means rows need d entries");
      }
      for (int c = 0; c < spec.d; ++c) spec.regime_means(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    }
    const auto noise = j.at("regime_noise_std").get<std::vector<double>>();
    spec.regime_noise_std = Eigen::Map<const VectorXd>(noise.data(), static_cast<Eigen::Index>(noise.size()));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Schema, std::string("synth spec: ") + e.what());
  }
  validate(spec);
  return spec;
}

}  // namespace mmsb
