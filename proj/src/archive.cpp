#include "mmsb/archive.hpp"

#include <map>

#include "mmsb/csv.hpp"
#include "mmsb/error.hpp"
#include "mmsb/provenance.hpp"

namespace mmsb {

namespace fs = std::filesystem;

namespace {

std::string indexed(const std::string& stem, std::size_t one_based) {
  return stem + "_" + std::to_string(one_based) + ".csv";
}

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Json transform_json(const AffineTransform& t) {
  return {{"offset", to_std(t.offset)}, {"scale", to_std(t.scale)}};
}

void expect_kind(const Json& meta, const fs::path& dir, const std::string& kind) {
  if (meta.value("kind", std::string()) != kind) {
    throw Error(ErrorKind::Schema, dir.string() + " is not a " + kind + " archive");
  }
}

template <typename F>
auto schema_guard(const fs::path& where, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Schema, where.string() + ": " + e.what());
  }
}

}  // namespace

Json read_json(const fs::path& file) {
  try {
    return Json::parse(csv::read_text(file));
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Parse, file.string() + ": " + e.what());
  }
}

void write_json(const fs::path& file, const Json& value) { csv::write_text(file, value.dump(2) + "\n"); }

void write_snapshot_archive(const fs::path& dir, const SnapshotSequence& seq, const AffineTransform& transform,
                            bool standardized, const Json& extra) {
  validate(seq);
  fs::create_directories(dir);
  Json meta = extra;
  meta["kind"] = "snapshot";
  meta["s"] = seq.size();
  meta["n"] = seq.points();
  meta["d"] = seq.dimension();
  meta["times"] = seq.times;
  meta["standardized"] = standardized;
  meta["transform"] = transform_json(transform);
  std::vector<fs::path> files;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    files.push_back(dir / indexed("snapshot", k + 1));
    csv::write_weighted_points(files.back(), seq.supports[k], seq.weights[k]);
  }
  meta["content_sha256"] = sha256_files(files);
  write_json(dir / "meta.json", meta);
}

SnapshotArchive read_snapshot_archive(const fs::path& dir) {
  const fs::path meta_file = dir / "meta.json";
  SnapshotArchive ar;
  ar.meta = read_json(meta_file);
  expect_kind(ar.meta, dir, "snapshot");
  schema_guard(meta_file, [&] {
    const auto s = ar.meta.at("s").get<std::size_t>();
    ar.sequence.times = ar.meta.at("times").get<std::vector<double>>();
    if (ar.sequence.times.size() != s) throw Error(ErrorKind::Schema, meta_file.string() + ": times do not match s");
    ar.standardized = ar.meta.at("standardized").get<bool>();
    ar.transform.offset = to_eigen(ar.meta.at("transform").at("offset").get<std::vector<double>>());
    ar.transform.scale = to_eigen(ar.meta.at("transform").at("scale").get<std::vector<double>>());
    for (std::size_t k = 0; k < s; ++k) {
      WeightedParticles p = csv::read_weighted_points(dir / indexed("snapshot", k + 1));
      ar.sequence.supports.push_back(std::move(p.points));
      ar.sequence.weights.push_back(std::move(p.weights));
    }
    return 0;
  });
  validate(ar.sequence);
  if (ar.transform.dimension() != ar.sequence.dimension()) {
    throw Error(ErrorKind::Schema, meta_file.string() + ": transform dimension does not match snapshots");
  }
  return ar;
}

void write_held_out_archive(const fs::path& dir, const HeldOutMeasures& held, const Json& extra) {
  if (held.times.empty() || held.times.size() != held.measures.size()) {
    throw Error(ErrorKind::Argument, "held-out archive needs one measure per time");
  }
  fs::create_directories(dir);
  Json meta = extra;
  meta["kind"] = "held_out";
  meta["count"] = held.times.size();
  meta["d"] = held.measures.front().dimension();
  meta["times"] = held.times;
  meta["cycles"] = held.cycles;
  meta["positions"] = held.positions;
  std::vector<fs::path> files;
  for (std::size_t k = 0; k < held.times.size(); ++k) {
    files.push_back(dir / indexed("held_out", k + 1));
    csv::write_weighted_points(files.back(), held.measures[k].points, held.measures[k].weights);
  }
  meta["content_sha256"] = sha256_files(files);
  write_json(dir / "meta.json", meta);
}

HeldOutMeasures read_held_out_archive(const fs::path& dir) {
  const fs::path meta_file = dir / "meta.json";
  const Json meta = read_json(meta_file);
  expect_kind(meta, dir, "held_out");
  HeldOutMeasures held;
  schema_guard(meta_file, [&] {
    held.times = meta.at("times").get<std::vector<double>>();
    held.cycles = meta.value("cycles", std::vector<int>(held.times.size(), 0));
    held.positions = meta.value("positions", std::vector<int>(held.times.size(), 0));
    return 0;
  });
  if (held.times.empty()) throw Error(ErrorKind::Schema, meta_file.string() + ": no held-out times");
  for (std::size_t k = 0; k < held.times.size(); ++k) {
    held.measures.push_back(csv::read_weighted_points(dir / indexed("held_out", k + 1)));
    if (held.measures.back().dimension() != held.measures.front().dimension()) {
      throw Error(ErrorKind::Schema, dir.string() + ": held-out measures disagree on dimension");
    }
  }
  return held;
}

void write_diagnostics_csv(const fs::path& file, const std::vector<SweepRecord<double>>& diagnostics) {
  std::string out = "sweep,sigma,hilbert_distance,l1_error\n";
  for (std::size_t it = 0; it < diagnostics.size(); ++it) {
    const auto& rec = diagnostics[it];
    for (Eigen::Index k = 0; k < rec.hilbert_distances.size(); ++k) {
      out += std::to_string(it + 1) + "," + std::to_string(k + 1) + "," + csv::format(rec.hilbert_distances(k)) +
             "," + csv::format(rec.marginal_l1_errors(k)) + "\n";
    }
  }
  csv::write_text(file, out);
}

std::string write_solution_archive(const fs::path& dir, const BridgeSolution<double>& sol, const SolverConfig& cfg,
                                   const fs::path& snapshot_dir, const Json& extra) {
  fs::create_directories(dir);
  std::vector<fs::path> files;
  for (std::size_t k = 0; k < sol.scalings.size(); ++k) {
    std::string out = "u\n";
    for (Eigen::Index i = 0; i < sol.scalings[k].size(); ++i) out += csv::format(sol.scalings[k](i)) + "\n";
    files.push_back(dir / indexed("u", k + 1));
    csv::write_text(files.back(), out);
  }
  write_diagnostics_csv(dir / "diagnostics.csv", sol.diagnostics);
  const std::string id = sha256_files(files).substr(0, 16);

  Json meta = extra;
  meta["kind"] = "solution";
  meta["solution_id"] = id;
  meta["epsilon"] = cfg.epsilon;
  meta["tolerance"] = cfg.tolerance;
  meta["max_iterations"] = cfg.max_iterations;
  meta["cost_scale"] = std::string(to_string(cfg.cost_scale));
  meta["cost_scale_factor"] = static_cast<double>(sol.kernel.cost_scale_factor);
  meta["recompute_products"] = cfg.recompute_products;
  meta["iterations"] = sol.sweeps();
  meta["converged"] = sol.converged;
  meta["s"] = sol.snapshots();
  meta["n"] = sol.points();
  if (!sol.kernel.matrices.empty() && sol.scalings.size() == sol.kernel.snapshots()) {
    const ObjectiveTerms<double> obj = objective_terms(sol);
    meta["objective"] = {{"value", obj.total()}, {"transport", obj.transport}, {"entropy", obj.entropy}};
  }
  std::vector<double> hilbert, l1, wall;
  for (const auto& rec : sol.diagnostics) {
    hilbert.push_back(rec.hilbert_distances.maxCoeff());
    l1.push_back(rec.marginal_l1_errors.maxCoeff());
    wall.push_back(rec.wall_time);
  }
  meta["diagnostics"] = {{"max_hilbert_distance", hilbert}, {"max_l1_error", l1}, {"wall_time_seconds", wall}};
  const fs::path rel = fs::relative(fs::absolute(snapshot_dir), fs::absolute(dir));
  meta["snapshot_archive"] = rel.generic_string();
  meta["snapshot_archive_sha256"] = read_json(snapshot_dir / "meta.json").value("content_sha256", std::string());
  write_json(dir / "solution.json", meta);
  return id;
}

LoadedSolution read_solution_archive(const fs::path& dir) {
  const fs::path meta_file = dir / "solution.json";
  LoadedSolution out;
  out.meta = read_json(meta_file);
  expect_kind(out.meta, dir, "solution");
  fs::path snapshot_dir;
  bool converged = false;
  std::size_t s = 0;
  schema_guard(meta_file, [&] {
    out.id = out.meta.at("solution_id").get<std::string>();
    out.config.epsilon = out.meta.at("epsilon").get<double>();
    out.config.tolerance = out.meta.at("tolerance").get<double>();
    out.config.max_iterations = out.meta.at("max_iterations").get<int>();
    out.config.cost_scale = parse_cost_scale(out.meta.at("cost_scale").get<std::string>());
    out.config.recompute_products = out.meta.value("recompute_products", false);
    converged = out.meta.at("converged").get<bool>();
    s = out.meta.at("s").get<std::size_t>();
    snapshot_dir = out.meta.at("snapshot_archive").get<std::string>();
    return 0;
  });
  if (snapshot_dir.is_relative()) snapshot_dir = dir / snapshot_dir;
  SnapshotArchive snap = read_snapshot_archive(snapshot_dir);
  if (snap.sequence.size() != s) {
    throw Error(ErrorKind::Validation, meta_file.string() + ": snapshot archive has a different s");
  }
  const std::string expected = out.meta.value("snapshot_archive_sha256", std::string());
  if (!expected.empty() && expected != snap.meta.value("content_sha256", std::string())) {
    throw Error(ErrorKind::Validation, meta_file.string() + ": snapshot archive content changed since solve");
  }

  out.snapshot_meta = snap.meta;
  BridgeSolution<double>& sol = out.solution;
  sol.kernel = build_kernel_chain(build_cost_chain<double>(snap.sequence), out.config);
  for (std::size_t k = 0; k < s; ++k) {
    const fs::path file = dir / indexed("u", k + 1);
    const csv::Table table = csv::read(file);
    if (table.header != std::vector<std::string>{"u"}) throw Error(ErrorKind::Schema, file.string() + ": expected header u");
    VectorXd u(static_cast<Eigen::Index>(table.rows.size()));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      u(static_cast<Eigen::Index>(r)) = csv::parse_double(table.rows[r][0], table, r);
    }
    if (u.size() != snap.sequence.points()) throw Error(ErrorKind::Schema, file.string() + ": wrong length");
    sol.scalings.push_back(std::move(u));
  }
  sol.marginals = std::move(snap.sequence);
  sol.transform = std::move(snap.transform);
  sol.converged = converged;
  return out;
}

void write_plan_csv(const fs::path& file, const Eigen::SparseMatrix<double>& plan) {
  // Row-major listing regardless of the storage order.
  std::map<std::pair<Eigen::Index, Eigen::Index>, double> cells;
  for (int c = 0; c < plan.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(plan, c); it; ++it) cells[{it.row(), it.col()}] = it.value();
  }
  std::string out = "i,j,mass\n";
  for (const auto& [ij, v] : cells) {
    out += std::to_string(ij.first + 1) + "," + std::to_string(ij.second + 1) + "," + csv::format(v) + "\n";
  }
  csv::write_text(file, out);
}

void write_report_csv(const fs::path& file, const std::vector<SuiteEntry>& entries) {
  std::string out = "tau,sigma,lambda,wasserstein_distance\n";
  for (const SuiteEntry& e : entries) {
    out += csv::format(e.tau) + "," + std::to_string(e.sigma + 1) + "," + csv::format(e.lambda) + "," +
           csv::format(e.distance) + "\n";
  }
  csv::write_text(file, out);
}

void write_table_csv(const fs::path& file, const std::vector<SuiteEntry>& entries, int interior) {
  std::map<int, std::map<int, double>> rows;
  for (const SuiteEntry& e : entries) rows[e.cycle][e.position] = e.distance;
  std::string out = "s_int,cycle";
  for (int j = 1; j <= interior + 1; ++j) out += ",W_" + std::to_string(j);
  out += "\n";
  for (const auto& [cycle, cells] : rows) {
    out += std::to_string(interior) + "," + std::to_string(cycle);
    for (int j = 1; j <= interior + 1; ++j) {
      out += ",";
      if (auto it = cells.find(j); it != cells.end()) out += csv::format(it->second);
    }
    out += "\n";
  }
  csv::write_text(file, out);
}

}  // namespace mmsb
