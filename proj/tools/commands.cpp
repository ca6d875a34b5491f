#include "commands.hpp"

#include <charconv>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "mmsb/archive.hpp"
#include "mmsb/context.hpp"
#include "mmsb/csv.hpp"
#include "mmsb/error.hpp"
#include "mmsb/evaluate.hpp"
#include "mmsb/provenance.hpp"
#include "mmsb/synth.hpp"

namespace mmsb::cli {

namespace fs = std::filesystem;

namespace {

// Flags and a flat JSON config share one key space: `--s-int` <-> "s_int".
// Flags given on the command line win over the file.
class Settings {
 public:
  explicit Settings(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_, "JSON file with default values for any option");
  }

  template <typename T>
  void add(const std::string& key, T& target, const std::string& help, bool flag = true) {
    CLI::Option* opt = flag ? app_->add_option(flag_name(key), target, help) : nullptr;
    if (opt) opt->capture_default_str();
    bindings_.push_back({key, opt, [&target](const Json& j) { target = j.get<T>(); },
                         [&target] { return Json(target); }});
  }

  void add_switch(const std::string& key, bool& target, const std::string& help) {
    CLI::Option* opt = app_->add_flag(flag_name(key), target, help);
    bindings_.push_back({key, opt, [&target](const Json& j) { target = j.get<bool>(); },
                         [&target] { return Json(target); }});
  }

  void resolve() {
    Json file = Json::object();
    if (!config_.empty()) {
      file = read_json(config_);
      if (!file.is_object()) throw Error(ErrorKind::Schema, config_ + ": config must be a JSON object");
    }
    for (const auto& [key, value] : file.items()) {
      bool known = false;
      for (const Binding& b : bindings_) known = known || b.key == key;
      if (!known) throw Error(ErrorKind::Schema, config_ + ": unknown key '" + key + "'");
    }
    for (const Binding& b : bindings_) {
      if ((b.option == nullptr || b.option->count() == 0) && file.contains(b.key)) {
        try {
          b.load(file.at(b.key));
        } catch (const Json::exception& e) {
          throw Error(ErrorKind::Schema, config_ + ": key '" + b.key + "': " + e.what());
        }
      }
    }
  }

  /// Every option with its final value.
  Json resolved() const {
    Json out = Json::object();
    for (const Binding& b : bindings_) out[b.key] = b.dump();
    return out;
  }

 private:
  struct Binding {
    std::string key;
    CLI::Option* option;
    std::function<void(const Json&)> load;
    std::function<Json()> dump;
  };

  static std::string flag_name(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return "--" + key;
  }

  CLI::App* app_;
  std::string config_;
  std::vector<Binding> bindings_;
};

int thread_budget() {
  const char* env = std::getenv("MMSB_THREADS");
  if (env == nullptr) return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const std::string text(env);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || value < 1) {
    throw Error(ErrorKind::Argument, "MMSB_THREADS must be a positive integer, got '" + text + "'");
  }
  return value;
}

void require(const std::string& value, const std::string& key) {
  if (value.empty()) throw Error(ErrorKind::Argument, "missing required option --" + key);
}

std::vector<fs::path> files_in(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "not a directory: " + dir.string());
  return list_profile_files(dir);
}

std::string indexed_name(const std::string& stem, std::size_t k) {
  return stem + "_" + std::to_string(k) + ".csv";
}

// ---------------------------------------------------------------- synth

struct SynthCommand {
  std::string out;
  std::uint64_t seed = 0;
  int n = 100;
  int d = 3;
  int n_c = 5;
  std::vector<double> cycle_mean_durations;
  double cycle_jitter_std = 0.01;
  std::vector<std::vector<double>> regime_means;
  std::vector<double> regime_noise_std;
  double sample_period = 0.010;
  int segments_per_cycle = 1;

  void bind(Settings& s) {
    s.add("out", out, "Output directory");
    s.add("seed", seed, "Random seed");
    s.add("n", n, "Number of profiles");
    s.add("d", d, "Resource dimension");
    s.add("n_c", n_c, "Control cycles per profile");
    s.add("cycle_mean_durations", cycle_mean_durations, "", false);
    s.add("cycle_jitter_std", cycle_jitter_std, "Std of cycle end times (s)");
    s.add("regime_means", regime_means, "", false);
    s.add("regime_noise_std", regime_noise_std, "", false);
    s.add("sample_period", sample_period, "Sampling period (s)");
    s.add("segments_per_cycle", segments_per_cycle, "Regime segments per cycle");
  }

  void fill_defaults() {
    if (cycle_mean_durations.empty()) {
      for (int k = 0; k < n_c; ++k) cycle_mean_durations.push_back(0.2 + 0.05 * (k % 3));
    }
    if (regime_means.empty()) {
      const int rows = n_c * segments_per_cycle;
      for (int r = 0; r < rows; ++r) {
        std::vector<double> row;
        for (int j = 0; j < d; ++j) row.push_back(static_cast<double>((3 * r + 5 * j) % 7) + 1.0);
        regime_means.push_back(row);
      }
    }
    if (regime_noise_std.empty()) regime_noise_std.assign(static_cast<std::size_t>(d), 0.3);
  }

  SynthSpec spec() const {
    SynthSpec sp;
    sp.n = n;
    sp.d = d;
    sp.n_c = n_c;
    sp.cycle_mean_durations = cycle_mean_durations;
    sp.cycle_jitter_std = cycle_jitter_std;
    sp.sample_period = sample_period;
    sp.seed = seed;
    sp.segments_per_cycle = segments_per_cycle;
    sp.regime_means.resize(static_cast<Eigen::Index>(regime_means.size()), d);
    for (std::size_t r = 0; r < regime_means.size(); ++r) {
      if (regime_means[r].size() != static_cast<std::size_t>(d)) {
        throw Error(ErrorKind::Validation, "regime_means rows need d entries");
      }
      for (int j = 0; j < d; ++j) sp.regime_means(static_cast<Eigen::Index>(r), j) = regime_means[r][static_cast<std::size_t>(j)];
    }
    sp.regime_noise_std = Eigen::Map<const VectorXd>(regime_noise_std.data(),
                                                     static_cast<Eigen::Index>(regime_noise_std.size()));
    return sp;
  }

  int execute(Settings& s, std::ostream& os) {
    require(out, "out");
    fill_defaults();
    const SynthSpec sp = spec();
    const ProfileSet ps = generate_profiles(sp, thread_budget());
    write_profile_set(ps, out);

    std::vector<fs::path> files = list_profile_files(fs::path(out) / "profiles");
    Json record = Json::parse(to_json(sp));
    record["config"] = s.resolved();
    record["provenance"] = {{"profiles_sha256", sha256_files(files)},
                            {"cycles_sha256", sha256_file(fs::path(out) / "cycles.csv")}};
    write_json(fs::path(out) / "synth_spec.json", record);
    os << "synth: wrote " << ps.size() << " profiles to " << out << "\n";
    return 0;
  }
};

// ---------------------------------------------------------------- snapshot

struct SnapshotCommand {
  std::string profiles;
  std::string cycles;
  std::string out;
  int s_int = 4;
  double window = 0.005;
  bool standardize = true;
  std::string held_out_profiles;
  std::string held_out_cycles;
  std::string held_out_out;

  void bind(Settings& s) {
    s.add("profiles", profiles, "Directory of profile CSVs");
    s.add("cycles", cycles, "Cycles CSV");
    s.add("out", out, "Snapshot archive directory");
    s.add("s_int", s_int, "Interior snapshots per cycle");
    s.add("window", window, "Nearest-sample window (s)");
    s.add("standardize", standardize, "Z-score features before solving");
    s.add("held_out_profiles", held_out_profiles, "Profiles for a held-out archive");
    s.add("held_out_cycles", held_out_cycles, "Cycles CSV of the held-out profiles");
    s.add("held_out_out", held_out_out, "Held-out archive directory");
  }

  int execute(Settings& s, std::ostream& os) {
    require(profiles, "profiles");
    require(cycles, "cycles");
    require(out, "out");
    const int threads = thread_budget();
    const std::vector<fs::path> files = files_in(profiles);
    const ProfileSet ps = ingest_profiles(files, cycles, threads);
    const std::vector<CycleStatistic> stats = cycle_time_statistics(ps);
    const SnapshotPlan plan = build_snapshot_plan(stats, s_int);
    const SnapshotSequence raw = extract_snapshots(ps, plan, window);

    Json plan_json = {{"cycles", plan.cycles}, {"s_int", plan.interior},
                      {"cycle_mean_end_times", plan.cycle_mean_end_times}};
    std::vector<double> stds;
    for (const CycleStatistic& st : stats) stds.push_back(st.stddev);
    plan_json["cycle_end_time_std"] = stds;

    Json extra;
    extra["config"] = s.resolved();
    extra["plan"] = plan_json;
    extra["provenance"] = {{"profiles_sha256", sha256_files(files)}, {"cycles_sha256", sha256_file(cycles)}};
    if (standardize) {
      const auto [seq, transform] = mmsb::standardize(raw);
      write_snapshot_archive(out, seq, transform, true, extra);
    } else {
      write_snapshot_archive(out, raw, AffineTransform::identity(raw.dimension()), false, extra);
    }
    os << "snapshot: s=" << raw.size() << " n=" << raw.points() << " d=" << raw.dimension() << " -> " << out
       << "\n";

    if (!held_out_out.empty() || !held_out_profiles.empty() || !held_out_cycles.empty()) {
      require(held_out_profiles, "held-out-profiles");
      require(held_out_cycles, "held-out-cycles");
      require(held_out_out, "held-out-out");
      write_held_out(plan, s, threads, os);
    }
    return 0;
  }

  void write_held_out(const SnapshotPlan& plan, Settings& s, int threads, std::ostream& os) const {
    const std::vector<fs::path> files = files_in(held_out_profiles);
    const ProfileSet ps = ingest_profiles(files, held_out_cycles, threads);
    HeldOutMeasures held;
    for (int c = 1; c <= plan.cycles; ++c) {
      const std::vector<double> q = plan.query_times(c);
      for (std::size_t j = 0; j < q.size(); ++j) {
        held.times.push_back(q[j]);
        held.cycles.push_back(c);
        held.positions.push_back(static_cast<int>(j) + 1);
      }
    }
    const std::vector<MatrixXd> supports = extract_at_times(ps, held.times, window);
    for (const MatrixXd& x : supports) held.measures.push_back(WeightedParticles::uniform(x));
    Json extra;
    extra["config"] = s.resolved();
    extra["provenance"] = {{"profiles_sha256", sha256_files(files)},
                           {"cycles_sha256", sha256_file(held_out_cycles)}};
    write_held_out_archive(held_out_out, held, extra);
    os << "snapshot: held-out archive with " << held.times.size() << " query times -> " << held_out_out << "\n";
  }
};

// ---------------------------------------------------------------- solve

struct SolveCommand {
  std::string snapshots;
  std::string out;
  double eps = 0.1;
  double tol = 1e-8;
  int max_iter = 5000;
  std::string cost_scale = "mean";
  bool recompute_products = false;

  void bind(Settings& s) {
    s.add("snapshots", snapshots, "Snapshot archive directory");
    s.add("out", out, "Solution archive directory");
    s.add("eps", eps, "Entropic regularization");
    s.add("tol", tol, "Max-sigma L1 marginal tolerance");
    s.add("max_iter", max_iter, "Sweep budget");
    s.add("cost_scale", cost_scale, "none | mean | max");
    s.add_switch("recompute_products", recompute_products, "Recompute prefix/suffix products per update");
  }

  int execute(Settings& s, std::ostream& os) {
    require(snapshots, "snapshots");
    require(out, "out");
    SolverConfig cfg;
    cfg.epsilon = eps;
    cfg.tolerance = tol;
    cfg.max_iterations = max_iter;
    cfg.cost_scale = parse_cost_scale(cost_scale);
    cfg.recompute_products = recompute_products;
    validate(cfg);

    const SnapshotArchive ar = read_snapshot_archive(snapshots);
    Json extra;
    extra["config"] = s.resolved();
    try {
      const BridgeSolution<double> sol = sinkhorn_solve<double>(ar.sequence, cfg, ar.transform);
      const std::string id = write_solution_archive(out, sol, cfg, snapshots, extra);
      os << "solve: converged in " << sol.sweeps() << " sweeps, solution " << id << " -> " << out << "\n";
      return 0;
    } catch (const NonConvergenceError<double>& e) {
      write_solution_archive(out, e.partial(), cfg, snapshots, extra);
      throw;
    }
  }
};

// ---------------------------------------------------------------- predict

struct PredictCommand {
  std::string solution;
  std::string library;
  std::string context;
  std::string context_id;
  double w_cyber = 1.0;
  double w_phys = 1.0;
  std::vector<double> tau;
  int cycle = 0;
  int points = 5;
  double prune = 0.0;
  bool emit_plan = false;
  std::string out;

  void bind(Settings& s) {
    s.add("solution", solution, "Solution archive directory");
    s.add("library", library, "Context manifest JSON");
    s.add("context", context, "Query context JSON");
    s.add("context_id", context_id, "Library context to use directly");
    s.add("w_cyber", w_cyber, "Weight of the cyber distance");
    s.add("w_phys", w_phys, "Weight of the path distance");
    s.add("tau", tau, "Query times (s)");
    s.add("cycle", cycle, "Predict at equispaced interior times of this cycle");
    s.add("points", points, "Number of times used with --cycle");
    s.add("prune", prune, "Drop atoms below this weight");
    s.add_switch("emit_plan", emit_plan, "Also write the consecutive plan used per query");
    s.add("out", out, "Output directory");
  }

  int execute(Settings& s, std::ostream& os) {
    require(out, "out");
    Json match_json;
    fs::path solution_dir = solution;
    if (!library.empty()) {
      const ContextLibrary lib = load_context_library(library);
      const ContextEntry* chosen = nullptr;
      if (!context_id.empty()) {
        for (const ContextEntry& e : lib.entries) {
          if (e.context.id == context_id) chosen = &e;
        }
        if (chosen == nullptr) throw Error(ErrorKind::Argument, "unknown context id '" + context_id + "'");
        match_json = {{"selected", context_id}};
      } else {
        require(context, "context");
        const Context query = load_context(context);
        const auto ranking = match_context(lib, query, {w_cyber, w_phys});
        for (const ContextEntry& e : lib.entries) {
          if (e.context.id == ranking.front().id) chosen = &e;
        }
        Json ranked = Json::array();
        for (const ContextMatch& m : ranking) {
          ranked.push_back({{"id", m.id}, {"score", m.score}, {"cyber_distance", m.cyber_distance},
                            {"phys_distance", m.phys_distance}});
        }
        match_json = {{"selected", ranking.front().id}, {"ranking", ranked}};
      }
      solution_dir = chosen->archive_dir;
    } else if (!context_id.empty() || !context.empty()) {
      throw Error(ErrorKind::Argument, "--context and --context-id need --library");
    }
    if (solution_dir.empty()) throw Error(ErrorKind::Argument, "missing required option --solution or --library");

    const LoadedSolution loaded = read_solution_archive(solution_dir);
    const BridgeSolution<double>& sol = loaded.solution;
    std::vector<double> queries = tau;
    if (cycle > 0) {
      if (points < 1) throw Error(ErrorKind::Argument, "--points must be positive");
      const auto ends = loaded.snapshot_meta.at("plan").at("cycle_mean_end_times").get<std::vector<double>>();
      if (cycle > static_cast<int>(ends.size())) {
        throw Error(ErrorKind::OutOfRange, "cycle " + std::to_string(cycle) + " outside 1.." +
                                               std::to_string(ends.size()));
      }
      const double start = cycle == 1 ? 0.0 : ends[static_cast<std::size_t>(cycle) - 2];
      const double end = ends[static_cast<std::size_t>(cycle) - 1];
      for (int j = 1; j <= points; ++j) queries.push_back(start + (end - start) * j / (points + 1));
    }
    if (queries.empty()) throw Error(ErrorKind::Argument, "no query times: give --tau or --cycle");

    fs::create_directories(out);
    Json entries = Json::array();
    for (std::size_t k = 0; k < queries.size(); ++k) {
      const WeightedParticles p = predict_distribution(sol, Query{queries[k], prune});
      const Interval iv = locate_interval(sol.marginals.times, queries[k]);
      const std::string file = indexed_name("prediction", k + 1);
      csv::write_weighted_points(fs::path(out) / file, p.points, p.weights);
      Json entry = {{"file", file}, {"tau", queries[k]}, {"sigma", iv.sigma + 1}, {"lambda", iv.lambda},
                    {"prune_threshold", prune}, {"atoms", p.size()}};
      if (emit_plan) {
        const std::string plan_file = indexed_name("plan", k + 1);
        const MatrixXd plan = project_pair(sol, iv.sigma, iv.sigma + 1);
        write_plan_csv(fs::path(out) / plan_file, plan.sparseView());
        entry["plan_file"] = plan_file;
      }
      entries.push_back(entry);
    }
    Json meta;
    meta["config"] = s.resolved();
    meta["solution_id"] = loaded.id;
    if (!match_json.is_null()) meta["context_match"] = match_json;
    meta["predictions"] = entries;
    write_json(fs::path(out) / "prediction_meta.json", meta);
    os << "predict: " << queries.size() << " predictions from solution " << loaded.id << " -> " << out << "\n";
    return 0;
  }
};

// ---------------------------------------------------------------- evaluate

struct EvaluateCommand {
  std::string solution;
  std::string held_out;
  std::string out;
  double prune = 0.0;
  bool emit_plan = false;
  std::string units = "raw";

  void bind(Settings& s) {
    s.add("solution", solution, "Solution archive directory");
    s.add("held_out", held_out, "Held-out archive directory");
    s.add("out", out, "Report directory");
    s.add("prune", prune, "Drop predicted atoms below this weight");
    s.add_switch("emit_plan", emit_plan, "Write the optimal transport plan per query");
    s.add("units", units, "raw | standardized");
  }

  int execute(Settings& s, std::ostream& os) {
    require(solution, "solution");
    require(held_out, "held-out");
    require(out, "out");
    SuiteOptions opts;
    opts.prune_threshold = prune;
    opts.keep_plans = emit_plan;
    opts.threads = thread_budget();
    if (units == "raw") {
      opts.units = EvaluationUnits::Raw;
    } else if (units == "standardized") {
      opts.units = EvaluationUnits::Standardized;
    } else {
      throw Error(ErrorKind::Validation, "units must be raw or standardized; got '" + units + "'");
    }
    const LoadedSolution loaded = read_solution_archive(solution);
    if (!fs::is_directory(held_out)) throw Error(ErrorKind::Io, "held-out archive not found: " + held_out);
    const HeldOutMeasures held = read_held_out_archive(held_out);
    if (held.measures.front().dimension() != loaded.solution.marginals.dimension()) {
      throw Error(ErrorKind::Argument, "held-out dimension " + std::to_string(held.measures.front().dimension()) +
                                           " does not match the solution's " +
                                           std::to_string(loaded.solution.marginals.dimension()));
    }
    const std::vector<SuiteEntry> entries = evaluate_prediction_suite(loaded.solution, held, held.times, opts);

    fs::create_directories(out);
    write_report_csv(fs::path(out) / "report.csv", entries);
    const int interior = loaded.snapshot_meta.contains("plan") ? loaded.snapshot_meta["plan"].value("s_int", 0) : 0;
    write_table_csv(fs::path(out) / "table.csv", entries, interior);
    if (emit_plan) {
      for (std::size_t k = 0; k < entries.size(); ++k) {
        write_plan_csv(fs::path(out) / indexed_name("plan", k + 1), entries[k].transport.plan);
      }
    }
    double mean = 0.0;
    for (const SuiteEntry& e : entries) mean += e.distance;
    mean /= static_cast<double>(entries.size());
    Json meta;
    meta["config"] = s.resolved();
    meta["solution_id"] = loaded.id;
    meta["held_out_sha256"] = read_json(fs::path(held_out) / "meta.json").value("content_sha256", std::string());
    meta["queries"] = entries.size();
    meta["mean_wasserstein_distance"] = mean;
    write_json(fs::path(out) / "evaluate_meta.json", meta);
    os << "evaluate: " << entries.size() << " queries, mean W " << mean << " -> " << out << "\n";
    return 0;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimarginal Schrodinger bridge pipeline", "mmsb"};
  app.require_subcommand(1);

  struct Entry {
    CLI::App* app;
    std::unique_ptr<Settings> settings;
    std::function<int(Settings&)> execute;
  };
  std::vector<Entry> entries;
  SynthCommand synth;
  SnapshotCommand snapshot;
  SolveCommand solve;
  PredictCommand predict;
  EvaluateCommand evaluate;
  auto add = [&](const char* name, const char* help, auto& cmd) {
    CLI::App* sub = app.add_subcommand(name, help);
    auto settings = std::make_unique<Settings>(sub);
    cmd.bind(*settings);
    entries.push_back({sub, std::move(settings), [&cmd, &out](Settings& s) { return cmd.execute(s, out); }});
  };
  add("synth", "Generate synthetic profiles", synth);
  add("snapshot", "Build a snapshot archive from profiles", snapshot);
  add("solve", "Fit the bridge to a snapshot archive", solve);
  add("predict", "Predict distributions at query times", predict);
  add("evaluate", "Score predictions against held-out snapshots", evaluate);

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    for (Entry& e : entries) {
      if (e.app->parsed()) {
        e.settings->resolve();
        return e.execute(*e.settings);
      }
    }
    return 2;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return is_usage_error(e.kind()) ? 2 : 1;
  } catch (const fs::filesystem_error& e) {
    err << "error (io): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace mmsb::cli
