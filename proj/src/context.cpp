#include "mmsb/context.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "mmsb/csv.hpp"
#include "mmsb/error.hpp"

namespace mmsb {

namespace fs = std::filesystem;
using nlohmann::json;

void validate(const Context& c) {
  if (c.cyber(0) < 1 || c.cyber(1) < 1) {
    throw Error(ErrorKind::Validation, "context '" + c.id + "': cyber entries must be >= 1");
  }
  if (c.phys.rows() == 0) throw Error(ErrorKind::Validation, "context '" + c.id + "': empty path");
  for (Eigen::Index k = 1; k < c.phys.rows(); ++k) {
    if (!(c.phys(k, 0) > c.phys(k - 1, 0))) {
      throw Error(ErrorKind::Validation,
                  "context '" + c.id + "': path x-coordinates must be strictly increasing");
    }
  }
}

double frechet_distance(const Polyline& a, const Polyline& b) {
  const Eigen::Index p = a.rows();
  const Eigen::Index q = b.rows();
  if (p == 0 || q == 0) throw Error(ErrorKind::Argument, "frechet_distance: empty polyline");
  // ca(i, j): coupling cost of the prefixes a[0..i], b[0..j]; one row kept.
  Eigen::VectorXd prev(q), cur(q);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < q; ++j) {
      const double d = (a.row(i) - b.row(j)).norm();
      double reach;
      if (i == 0 && j == 0) {
        reach = d;
      } else if (i == 0) {
        reach = std::max(cur(j - 1), d);
      } else if (j == 0) {
        reach = std::max(prev(0), d);
      } else {
        reach = std::max(std::min({prev(j), prev(j - 1), cur(j - 1)}), d);
      }
      cur(j) = reach;
    }
    std::swap(prev, cur);
  }
  return prev(q - 1);
}

std::vector<ContextMatch> match_context(const ContextLibrary& lib, const Context& query,
                                        ContextWeights weights) {
  if (lib.entries.empty()) throw Error(ErrorKind::State, "context library is empty");
  if (!(weights.cyber >= 0.0 && weights.phys >= 0.0)) {
    throw Error(ErrorKind::Argument, "context weights must be nonnegative");
  }
  std::vector<ContextMatch> out;
  out.reserve(lib.entries.size());
  double max_cyber = 0.0;
  double max_phys = 0.0;
  for (const ContextEntry& e : lib.entries) {
    ContextMatch m;
    m.id = e.context.id;
    m.cyber_distance = (e.context.cyber - query.cyber).cast<double>().norm();
    m.phys_distance = weights.phys > 0.0 ? frechet_distance(e.context.phys, query.phys) : 0.0;
    max_cyber = std::max(max_cyber, m.cyber_distance);
    max_phys = std::max(max_phys, m.phys_distance);
    out.push_back(std::move(m));
  }
  for (ContextMatch& m : out) {
    const double cyber = max_cyber > 0.0 ? m.cyber_distance / max_cyber : 0.0;
    const double phys = max_phys > 0.0 ? m.phys_distance / max_phys : 0.0;
    m.score = weights.cyber * cyber + weights.phys * phys;
  }
  std::sort(out.begin(), out.end(), [](const ContextMatch& x, const ContextMatch& y) {
    return x.score != y.score ? x.score < y.score : x.id < y.id;
  });
  return out;
}

Polyline read_polyline_csv(const fs::path& file) {
  const csv::Table table = csv::read(file);
  if (table.header != std::vector<std::string>{"x", "y"}) {
    throw Error(ErrorKind::Schema, file.string() + ": expected header x,y");
  }
  Polyline line(static_cast<Eigen::Index>(table.rows.size()), 2);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    line(static_cast<Eigen::Index>(r), 0) = csv::parse_double(table.rows[r][0], table, r);
    line(static_cast<Eigen::Index>(r), 1) = csv::parse_double(table.rows[r][1], table, r);
  }
  return line;
}

namespace {

json parse_json_file(const fs::path& file) {
  try {
    return json::parse(csv::read_text(file));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, file.string() + ": " + e.what());
  }
}

Context context_from_json(const json& j, const fs::path& base) {
  Context c;
  try {
    c.id = j.value("id", std::string("query"));
    const auto cyber = j.at("cyber").get<std::vector<int>>();
    if (cyber.size() != 2) throw Error(ErrorKind::Schema, "cyber must have two entries");
    c.cyber = {cyber[0], cyber[1]};
    fs::path phys = j.at("phys_file").get<std::string>();
    c.phys = read_polyline_csv(phys.is_absolute() ? phys : base / phys);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Schema, std::string("context entry: ") + e.what());
  }
  validate(c);
  return c;
}

}  // namespace

ContextLibrary load_context_library(const fs::path& manifest) {
  const json doc = parse_json_file(manifest);
  if (!doc.is_array()) throw Error(ErrorKind::Schema, manifest.string() + ": expected a JSON array");
  const fs::path base = manifest.parent_path();
  ContextLibrary lib;
  std::set<std::string> ids;
  for (const json& j : doc) {
    ContextEntry e;
    e.context = context_from_json(j, base);
    if (!j.contains("id")) throw Error(ErrorKind::Schema, "manifest entry without id");
    if (!ids.insert(e.context.id).second) {
      throw Error(ErrorKind::Validation, "duplicate context id '" + e.context.id + "'");
    }
    fs::path archive = j.value("archive_dir", std::string());
    if (archive.empty()) throw Error(ErrorKind::Schema, "context '" + e.context.id + "' has no archive_dir");
    e.archive_dir = archive.is_absolute() ? archive : base / archive;
    if (!fs::is_directory(e.archive_dir)) {
      throw Error(ErrorKind::Validation, "context '" + e.context.id + "' references missing archive " +
                                             e.archive_dir.string());
    }
    lib.entries.push_back(std::move(e));
  }
  return lib;
}

Context load_context(const fs::path& file) {
  return context_from_json(parse_json_file(file), file.parent_path());
}

}  // namespace mmsb
