#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mmsb/types.hpp"

namespace mmsb::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
  std::string source;
};

/// Reads a comma-separated file with a header line. Blank lines are skipped;
/// a row whose field count differs from the header is a parse error.
Table read(const std::filesystem::path& file);

double parse_double(std::string_view field, const Table& table, std::size_t row);
long long parse_int(std::string_view field, const Table& table, std::size_t row);

/// Shortest decimal representation that round-trips exactly.
std::string format(double value);

/// Header `xi_1,...,xi_d` followed by `extra` column names.
std::string point_header(Eigen::Index d, std::string_view extra = {});

/// Writes rows of `points` with the matching `weights` column.
void write_weighted_points(const std::filesystem::path& file, const MatrixXd& points,
                           const VectorXd& weights);

/// Reads a `xi_1,...,xi_d,weight` file.
WeightedParticles read_weighted_points(const std::filesystem::path& file);

void write_text(const std::filesystem::path& file, std::string_view text);
std::string read_text(const std::filesystem::path& file);

}  // namespace mmsb::csv
