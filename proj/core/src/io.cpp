#include "gazetrait/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <memory>
#include <sstream>

#include "gazetrait/error.hpp"

namespace gazetrait::io {

std::vector<std::string_view> split_row(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw Error(ErrorCode::InvalidArgument, "cannot format double");
  return std::string(buf.data(), ptr);
}

std::string format_fixed(double v, int digits) {
  std::array<char, 64> buf{};
  auto [ptr, ec] =
      std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, digits);
  if (ec != std::errc{}) throw Error(ErrorCode::InvalidArgument, "cannot format double");
  return std::string(buf.data(), ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool is_nonfinite_token(std::string_view s) {
  std::string lower;
  for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (!lower.empty() && (lower[0] == '+' || lower[0] == '-')) lower.erase(0, 1);
  return lower == "nan" || lower == "inf" || lower == "infinity";
}

[[noreturn]] void malformed(std::string_view cell, std::size_t row) {
  throw Error(ErrorCode::MalformedRow,
              "row " + std::to_string(row) + ": cannot parse '" + std::string(cell) + "'");
}

}  // namespace

double parse_double(std::string_view cell, std::size_t row) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) malformed(cell, row);
  return v;
}

long long parse_int(std::string_view cell, std::size_t row) {
  cell = trim(cell);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) malformed(cell, row);
  return v;
}

std::optional<double> parse_optional_double(std::string_view cell, std::size_t row) {
  cell = trim(cell);
  if (cell.empty() || is_nonfinite_token(cell)) return std::nullopt;
  const double v = parse_double(cell, row);
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

CsvReader::CsvReader(const std::filesystem::path& path) : path_(path), in_(path) {
  if (!in_) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::string first;
  if (!std::getline(in_, first)) {
    throw Error(ErrorCode::SchemaMismatch, path.string() + ": missing header");
  }
  for (auto cell : split_row(first)) header_.emplace_back(trim(cell));
}

void CsvReader::expect_header(const std::vector<std::string>& expected) const {
  if (header_ != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw Error(ErrorCode::SchemaMismatch, path_.string() + ": expected header '" + want + "'");
  }
}

bool CsvReader::next(std::vector<std::string_view>& cells) {
  while (std::getline(in_, line_)) {
    if (trim(line_).empty()) continue;
    ++row_;
    cells = split_row(line_);
    if (cells.size() != header_.size()) {
      throw Error(ErrorCode::MalformedRow, path_.string() + ": row " + std::to_string(row_) +
                                               " has " + std::to_string(cells.size()) +
                                               " cells, expected " +
                                               std::to_string(header_.size()));
    }
    return true;
  }
  return false;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + path.parent_path().string());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw Error(ErrorCode::IoFailure, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

}  // namespace gazetrait::io
