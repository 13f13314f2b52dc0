#include "resp/io.hpp"

#include "resp/errors.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace resp::io {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_row(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.emplace_back(trim(field));
  return out;
}

}  // namespace

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw DataError(path + ":1: missing column '" + std::string(name) + "'");
}

std::string CsvTable::where(std::size_t r) const { return path + ":" + std::to_string(lines.at(r)); }

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  CsvTable table;
  table.path = path.string();
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    auto fields = split_row(line);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size())
      throw DataError(table.path + ":" + std::to_string(number) + ": expected " + std::to_string(table.header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    table.rows.push_back(std::move(fields));
    table.lines.push_back(number);
  }
  if (table.header.empty()) throw DataError(table.path + ": empty file");
  return table;
}

double parse_double(std::string_view text, const std::string& where) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
    throw DataError(where + ": cannot parse '" + std::string(text) + "' as a number");
  if (!std::isfinite(value)) throw DataError(where + ": non-finite value '" + std::string(text) + "'");
  return value;
}

long long parse_int(std::string_view text, const std::string& where) {
  text = trim(text);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
    throw DataError(where + ": cannot parse '" + std::string(text) + "' as an integer");
  return value;
}

std::string format_double(double x) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  if (ec != std::errc()) throw Error(ErrorCategory::internal, "format_double failed");
  return {buf.data(), ptr};
}

LocationTable read_locations(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t id = t.column("id"), lon = t.column("lon"), lat = t.column("lat");
  LocationTable out;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row[id].empty()) throw DataError(t.where(r) + ": empty location id");
    if (!seen.insert(row[id]).second) throw DataError(t.where(r) + ": duplicate location id '" + row[id] + "'");
    try {
      out.locations.emplace_back(parse_double(row[lon], t.where(r)), parse_double(row[lat], t.where(r)));
    } catch (const DataError& e) {
      const std::string msg = e.what();
      throw DataError(msg.rfind(t.path, 0) == 0 ? msg : t.where(r) + ": " + msg);
    }
    out.ids.push_back(row[id]);
  }
  if (out.ids.empty()) throw DataError(t.path + ": no locations");
  return out;
}

void write_locations(const std::filesystem::path& path, const LocationTable& table) {
  std::string text = "id,lon,lat\n";
  for (std::size_t i = 0; i < table.ids.size(); ++i)
    text += table.ids[i] + "," + format_double(table.locations[i].lon) + "," + format_double(table.locations[i].lat) + "\n";
  write_text(path, text);
}

std::vector<std::string> order_times(std::vector<std::string> labels) {
  const bool numeric = std::all_of(labels.begin(), labels.end(), [](const std::string& s) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return !s.empty() && ec == std::errc() && ptr == s.data() + s.size();
  });
  if (numeric)
    std::sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
      return std::stoll(a) < std::stoll(b);
    });
  else
    std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

SeriesTable read_series(const std::filesystem::path& path, const std::vector<std::string>& location_ids) {
  const CsvTable t = read_csv(path);
  const std::size_t lc = t.column("location_id"), tc = t.column("time"), vc = t.column("value");
  std::map<std::string, Index> loc_index;
  for (std::size_t i = 0; i < location_ids.size(); ++i) loc_index[location_ids[i]] = static_cast<Index>(i);

  std::vector<std::string> labels;
  for (const auto& row : t.rows) labels.push_back(row[tc]);
  SeriesTable out;
  out.times = order_times(labels);
  std::map<std::string, Index> time_index;
  for (std::size_t j = 0; j < out.times.size(); ++j) time_index[out.times[j]] = static_cast<Index>(j);

  const Index n = static_cast<Index>(location_ids.size()), nt = static_cast<Index>(out.times.size());
  out.values = Matrix::Constant(n, nt, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> filled(static_cast<std::size_t>(n * nt), 0);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto li = loc_index.find(row[lc]);
    if (li == loc_index.end()) throw DataError(t.where(r) + ": unknown location id '" + row[lc] + "'");
    const Index j = time_index.at(row[tc]);
    auto& flag = filled[static_cast<std::size_t>(li->second * nt + j)];
    if (flag) throw DataError(t.where(r) + ": duplicate value for location '" + row[lc] + "' at time '" + row[tc] + "'");
    flag = 1;
    out.values(li->second, j) = parse_double(row[vc], t.where(r));
  }
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < nt; ++j)
      if (!filled[static_cast<std::size_t>(i * nt + j)])
        throw DataError(t.path + ": missing value for location '" + location_ids[static_cast<std::size_t>(i)] +
                        "' at time '" + out.times[static_cast<std::size_t>(j)] + "'");
  return out;
}

void write_series(const std::filesystem::path& path, const std::vector<std::string>& location_ids,
                  const std::vector<std::string>& times, const Matrix& values) {
  std::string text = "location_id,time,value\n";
  for (Index i = 0; i < values.rows(); ++i)
    for (Index j = 0; j < values.cols(); ++j)
      text += location_ids[static_cast<std::size_t>(i)] + "," + times[static_cast<std::size_t>(j)] + "," +
              format_double(values(i, j)) + "\n";
  write_text(path, text);
}

std::string diff_labels(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::string missing, extra;
  for (const auto& x : a)
    if (!sb.count(x)) missing += (missing.empty() ? "" : " ") + x;
  for (const auto& x : b)
    if (!sa.count(x)) extra += (extra.empty() ? "" : " ") + x;
  std::string out;
  if (!missing.empty()) out += "missing: " + missing;
  if (!extra.empty()) out += std::string(out.empty() ? "" : "; ") + "extra: " + extra;
  return out.empty() ? "same labels, different order" : out;
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCategory::internal, "SHA-256 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 15];
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw ConfigError("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

template <class T>
void append_le(std::string& out, T value) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  std::array<char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.append(bytes.data(), bytes.size());
}

template <class T>
T read_le(const std::string& in, std::size_t offset) {
  std::array<char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

void write_covariance(const std::filesystem::path& path, const Matrix& cov) {
  if (cov.rows() != cov.cols()) throw DimensionError("write_covariance: matrix must be square", cov.rows(), cov.cols());
  std::string out = "RESPCOV1";
  append_le<std::uint32_t>(out, static_cast<std::uint32_t>(cov.rows()));
  append_le<std::uint32_t>(out, 0);
  out.reserve(out.size() + static_cast<std::size_t>(cov.size()) * 8);
  for (Index i = 0; i < cov.rows(); ++i)
    for (Index j = 0; j < cov.cols(); ++j) append_le<double>(out, cov(i, j));
  write_text(path, out);
}

Matrix read_covariance(const std::filesystem::path& path) {
  const std::string in = read_text(path);
  if (in.size() < 16 || in.compare(0, 8, "RESPCOV1") != 0) throw DataError(path.string() + ": not a RESPCOV1 file");
  const auto d = static_cast<Index>(read_le<std::uint32_t>(in, 8));
  if (in.size() != 16 + static_cast<std::size_t>(d * d) * 8)
    throw DataError(path.string() + ": size does not match dimension " + std::to_string(d));
  Matrix cov(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) cov(i, j) = read_le<double>(in, 16 + static_cast<std::size_t>(i * d + j) * 8);
  return cov;
}

}  // namespace resp::io
