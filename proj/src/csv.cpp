#include "mmsb/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mmsb/error.hpp"

namespace mmsb::csv {

namespace {

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma == std::string_view::npos
                                                     ? std::string_view::npos
                                                     : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    fields.emplace_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string where(const Table& table, std::size_t row) {
  return table.source + ":" + std::to_string(table.line_numbers.at(row));
}

}  // namespace

Table read(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + file.string());
  Table table;
  table.source = file.string();
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto fields = split(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw Error(ErrorKind::Parse, table.source + ":" + std::to_string(line_no) + ": expected " +
                                        std::to_string(table.header.size()) + " fields, got " +
                                        std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) throw Error(ErrorKind::Parse, table.source + ": missing header");
  return table;
}

double parse_double(std::string_view field, const Table& table, std::size_t row) {
  double value = 0.0;
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw Error(ErrorKind::Parse,
                where(table, row) + ": not a number: '" + std::string(field) + "'");
  }
  return value;
}

long long parse_int(std::string_view field, const Table& table, std::size_t row) {
  long long value = 0;
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw Error(ErrorKind::Parse,
                where(table, row) + ": not an integer: '" + std::string(field) + "'");
  }
  return value;
}

std::string format(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string point_header(Eigen::Index d, std::string_view extra) {
  std::string header;
  for (Eigen::Index k = 0; k < d; ++k) {
    if (k) header += ',';
    header += "xi_" + std::to_string(k + 1);
  }
  if (!extra.empty()) {
    header += ',';
    header += extra;
  }
  return header;
}

void write_weighted_points(const std::filesystem::path& file, const MatrixXd& points,
                           const VectorXd& weights) {
  std::string out = point_header(points.cols(), "weight") + "\n";
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index k = 0; k < points.cols(); ++k) {
      out += format(points(i, k));
      out += ',';
    }
    out += format(weights(i));
    out += '\n';
  }
  write_text(file, out);
}

WeightedParticles read_weighted_points(const std::filesystem::path& file) {
  const Table table = read(file);
  const Eigen::Index cols = static_cast<Eigen::Index>(table.header.size());
  if (cols < 2 || table.header.back() != "weight") {
    throw Error(ErrorKind::Schema, file.string() + ": expected header xi_1,...,xi_d,weight");
  }
  for (Eigen::Index k = 0; k + 1 < cols; ++k) {
    if (table.header[k] != "xi_" + std::to_string(k + 1)) {
      throw Error(ErrorKind::Schema, file.string() + ": unexpected column " + table.header[k]);
    }
  }
  WeightedParticles p;
  const auto m = static_cast<Eigen::Index>(table.rows.size());
  p.points.resize(m, cols - 1);
  p.weights.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index k = 0; k + 1 < cols; ++k) {
      p.points(i, k) = parse_double(table.rows[i][k], table, i);
    }
    p.weights(i) = parse_double(table.rows[i][cols - 1], table, i);
  }
  return p;
}

void write_text(const std::filesystem::path& file, std::string_view text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + file.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed: " + file.string());
}

std::string read_text(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mmsb::csv
