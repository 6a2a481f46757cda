// Incremental claims run-off triangle: storage, CSV ingestion and serialization.
//
// Inputs are taken as-is; no scaling is applied to the payments.
#pragma once

#include <charconv>
#include <cstdio>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace tweedie {

/// (accident year, development year) pair.
struct CellIndex {
  int i = 0;
  int j = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Raised by load_triangle; carries the 1-based line and field position.
class TriangleParseError : public std::runtime_error {
 public:
  TriangleParseError(std::size_t line, std::size_t column, const std::string& what)
      : std::runtime_error("triangle csv line " + std::to_string(line) + ", field " +
                           std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Upper run-off triangle Y_{i,j}, i + j <= I. Immutable after construction.
class Triangle {
 public:
  /// `rows[i]` must hold exactly I - i + 1 finite non-negative payments.
  explicit Triangle(std::vector<std::vector<double>> rows) : rows_(std::move(rows)) {
    if (rows_.empty()) throw std::invalid_argument("triangle must have at least one row");
    const auto n = rows_.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (rows_[i].size() != n - i)
        throw std::invalid_argument("triangle row " + std::to_string(i) + " must have " +
                                    std::to_string(n - i) + " entries");
      for (double v : rows_[i])
        if (!std::isfinite(v) || v < 0.0)
          throw std::invalid_argument("triangle payments must be finite and >= 0");
    }
  }

  /// Largest accident / development index.
  int I() const noexcept { return static_cast<int>(rows_.size()) - 1; }

  double operator()(int i, int j) const { return rows_.at(i).at(j); }

  const std::vector<double>& row(int i) const { return rows_.at(i); }

  /// Number of observed cells, (I+1)(I+2)/2.
  std::size_t cell_count() const noexcept {
    const auto n = rows_.size();
    return n * (n + 1) / 2;
  }

  double total() const {
    double s = 0.0;
    for (const auto& r : rows_)
      for (double v : r) s += v;
    return s;
  }

  friend bool operator==(const Triangle&, const Triangle&) = default;

 private:
  std::vector<std::vector<double>> rows_;
};

/// Observed cells i + j <= I in row-major order.
inline std::vector<CellIndex> upper_triangle_indices(const Triangle& t) {
  std::vector<CellIndex> out;
  out.reserve(t.cell_count());
  for (int i = 0; i <= t.I(); ++i)
    for (int j = 0; j <= t.I() - i; ++j) out.push_back({i, j});
  return out;
}

/// Cells to be predicted, i + j > I with i <= I, in row-major order. Count I(I+1)/2.
inline std::vector<CellIndex> lower_triangle_indices(const Triangle& t) {
  std::vector<CellIndex> out;
  const int n = t.I();
  out.reserve(static_cast<std::size_t>(n) * (n + 1) / 2);
  for (int i = 1; i <= n; ++i)
    for (int j = n - i + 1; j <= n; ++j) out.push_back({i, j});
  return out;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool parse_double(std::string_view tok, double& out) {
  if (tok.empty()) return false;
  if (tok.front() == '+') tok.remove_prefix(1);
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

}  // namespace detail

/// Reads the triangle CSV: one row per accident year, row i holding Y_{i,0}..Y_{i,I-i}.
/// A single leading header row is allowed if its first token is non-numeric.
inline Triangle load_triangle(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> line_numbers;
  std::string line;
  std::size_t line_no = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto fields = detail::split_fields(trimmed);
    if (first_content_line) {
      first_content_line = false;
      double dummy = 0.0;
      if (!fields.front().empty() && !detail::parse_double(fields.front(), dummy)) continue;
    }
    std::vector<double> values;
    values.reserve(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v = 0.0;
      if (fields[c].empty()) throw TriangleParseError(line_no, c + 1, "empty field");
      if (!detail::parse_double(fields[c], v))
        throw TriangleParseError(line_no, c + 1, "non-numeric token '" + std::string(fields[c]) + "'");
      if (!std::isfinite(v)) throw TriangleParseError(line_no, c + 1, "non-finite value");
      if (v < 0.0) throw TriangleParseError(line_no, c + 1, "negative payment");
      values.push_back(v);
    }
    rows.push_back(std::move(values));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw TriangleParseError(line_no, 0, "no data rows");
  const auto n = rows.size();
  for (std::size_t r = 0; r < n; ++r) {
    if (rows[r].size() != n - r)
      throw TriangleParseError(line_numbers[r], std::min(rows[r].size(), n - r) + 1,
                               "ragged row: expected " + std::to_string(n - r) + " entries, found " +
                                   std::to_string(rows[r].size()));
  }
  return Triangle(std::move(rows));
}

inline Triangle load_triangle_string(const std::string& text) {
  std::istringstream in(text);
  return load_triangle(in);
}

/// Shortest round-trip decimal text of a double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// Decimal text with 17 significant digits, the precision of every numeric output file.
inline std::string format_17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Inverse of load_triangle; values round-trip bit-exactly.
inline void write_triangle(std::ostream& out, const Triangle& t) {
  for (int i = 0; i <= t.I(); ++i) {
    const auto& r = t.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j) out << ',';
      out << format_double(r[j]);
    }
    out << '\n';
  }
}

}  // namespace tweedie
