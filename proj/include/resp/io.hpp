#pragma once

#include "resp/covkernels.hpp"
#include "resp/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace resp::io {

/// Rows of a comma-separated file. The first row is the header; blank lines
/// are skipped. Each row remembers its 1-based line number for messages.
struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;

  /// Column index of name; throws DataError naming the file if absent.
  std::size_t column(std::string_view name) const;
  /// file:line prefix for error messages about row r.
  std::string where(std::size_t r) const;
};

CsvTable read_csv(const std::filesystem::path& path);

double parse_double(std::string_view text, const std::string& where);
long long parse_int(std::string_view text, const std::string& where);
/// Shortest representation that parses back to the same double.
std::string format_double(double x);

struct LocationTable {
  std::vector<std::string> ids;
  std::vector<Location> locations;
};

/// id,lon,lat
LocationTable read_locations(const std::filesystem::path& path);
void write_locations(const std::filesystem::path& path, const LocationTable& table);

/// Long-format series location_id,time,value keyed by the given location ids.
struct SeriesTable {
  std::vector<std::string> times;  // ordered labels
  Matrix values;                   // n_loc x n_t
};

/// Orders time labels numerically when every label is an integer, else lexically.
std::vector<std::string> order_times(std::vector<std::string> labels);

/// Reads a series for exactly the given locations; every (location, time)
/// cell must be present once.
SeriesTable read_series(const std::filesystem::path& path, const std::vector<std::string>& location_ids);
void write_series(const std::filesystem::path& path, const std::vector<std::string>& location_ids,
                  const std::vector<std::string>& times, const Matrix& values);

/// Describes how two ordered label lists differ ("missing in b: ...; extra in b: ...").
std::string diff_labels(const std::vector<std::string>& a, const std::vector<std::string>& b);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_text(const std::filesystem::path& path, std::string_view text);

/// Flat covariance file: "RESPCOV1", u32 dimension, u32 reserved, then
/// little-endian f64 values in row-major order.
void write_covariance(const std::filesystem::path& path, const Matrix& cov);
Matrix read_covariance(const std::filesystem::path& path);

}  // namespace resp::io
