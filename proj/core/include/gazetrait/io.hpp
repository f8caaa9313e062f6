#pragma once

// Small CSV and file helpers shared by the readers/writers of every module.
// The formats here are flat, comma-separated, unquoted tables with a header.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gazetrait::io {

std::vector<std::string_view> split_row(std::string_view line);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);
/// Fixed-point rendering with `digits` decimals.
std::string format_fixed(double v, int digits);

/// Throws MalformedRow (with the row number) on malformed input.
double parse_double(std::string_view cell, std::size_t row);
long long parse_int(std::string_view cell, std::size_t row);
/// Empty cells and non-finite tokens (nan, inf) are missing.
std::optional<double> parse_optional_double(std::string_view cell, std::size_t row);

class CsvReader {
 public:
  explicit CsvReader(const std::filesystem::path& path);

  const std::vector<std::string>& header() const noexcept { return header_; }
  /// Throws SchemaMismatch unless the header equals `expected` exactly.
  void expect_header(const std::vector<std::string>& expected) const;
  /// Returns false at end of file. Blank lines are skipped.
  bool next(std::vector<std::string_view>& cells);
  /// 1-based data row number of the last row returned by next().
  std::size_t row() const noexcept { return row_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::vector<std::string> header_;
  std::string line_;
  std::size_t row_ = 0;
};

std::string read_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes: full content or IoFailure.
void write_file(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace gazetrait::io
