#include "drcate/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "drcate/error.hpp"

namespace drcate {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      return fields;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  // Trailing blank lines carry no rows.
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

}  // namespace

std::optional<std::size_t> CsvTable::find(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

std::size_t CsvTable::column(std::string_view name) const {
  const auto index = find(name);
  if (!index) throw SchemaError("missing column '" + std::string(name) + "'");
  return *index;
}

CsvTable read_csv(std::string_view text) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("empty CSV input", 1, 0);

  CsvTable table;
  const auto names = split_fields(lines.front());
  for (std::size_t c = 0; c < names.size(); ++c) {
    std::string_view name = names[c];
    if (name.size() >= 2 && name.front() == '"' && name.back() == '"') name = name.substr(1, name.size() - 2);
    if (name.empty()) throw ParseError("empty header name", 1, c + 1);
    table.header.emplace_back(name);
  }

  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_fields(lines[r]);
    if (fields.size() != table.header.size())
      throw ParseError("expected " + std::to_string(table.header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       r + 1, std::min(fields.size(), table.header.size()) + 1);
    std::vector<CsvCell> row;
    row.reserve(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto field = fields[c];
      if (field.empty()) {
        row.emplace_back();
        continue;
      }
      double value = 0.0;
      const char* begin = field.data();
      const char* end = begin + field.size();
      if (*begin == '+') ++begin;
      const auto [ptr, ec] = std::from_chars(begin, end, value);
      if (ec != std::errc() || ptr != end || !std::isfinite(value))
        throw ParseError("not a finite number: '" + std::string(field) + "'", r + 1, c + 1);
      row.emplace_back(value);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return read_csv(buffer.str());
}

std::string format_number(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buffer, ptr);
}

void write_csv(std::ostream& out, const CsvTable& table) {
  for (std::size_t c = 0; c < table.header.size(); ++c) out << (c ? "," : "") << table.header[c];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      if (row[c]) out << format_number(*row[c]);
    }
    out << '\n';
  }
}

void write_csv_file(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  write_csv(out, table);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

Dataset dataset_from_csv(const CsvTable& table, const std::vector<std::string>& x1_names) {
  const auto y_col = table.column("y");
  const auto d_col = table.column("d");
  std::vector<std::size_t> covariates;
  for (std::size_t c = 0; c < table.header.size(); ++c)
    if (c != y_col && c != d_col) covariates.push_back(c);

  std::vector<int> x1_columns;
  for (const auto& name : x1_names) {
    const auto source = table.column(name);
    if (source == y_col || source == d_col) throw SchemaError("'" + name + "' cannot be a conditioning covariate");
    const auto pos = std::find(covariates.begin(), covariates.end(), source) - covariates.begin();
    x1_columns.push_back(static_cast<int>(pos));
  }

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(covariates.size()));
  Eigen::VectorXd y(n), d(n);
  const auto cell = [&](Eigen::Index i, std::size_t c) {
    const auto& value = table.rows[static_cast<std::size_t>(i)][c];
    if (!value)
      throw SchemaError("missing value at row " + std::to_string(i + 2) + ", column " + std::to_string(c + 1));
    return *value;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < covariates.size(); ++j) x(i, static_cast<Eigen::Index>(j)) = cell(i, covariates[j]);
    y[i] = cell(i, y_col);
    d[i] = cell(i, d_col);
    if (d[i] != 0.0 && d[i] != 1.0)
      throw SchemaError("treatment must be 0 or 1, found " + format_number(d[i]) + " at row " +
                        std::to_string(i + 2));
  }
  return Dataset(std::move(x), std::move(x1_columns), std::move(y), std::move(d));
}

CsvTable dataset_to_csv(const Dataset& data) {
  CsvTable table;
  for (int c = 0; c < data.covariate_dim(); ++c) table.header.push_back("x" + std::to_string(c + 1));
  table.header.emplace_back("y");
  table.header.emplace_back("d");
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    std::vector<CsvCell> row;
    for (int c = 0; c < data.covariate_dim(); ++c) row.emplace_back(data.x()(i, c));
    row.emplace_back(data.y()[i]);
    row.emplace_back(data.d()[i]);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace drcate
