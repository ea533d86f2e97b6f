#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "drcate/dataset.hpp"

namespace drcate {

// Dialect: comma separated, mandatory header row, '.' decimal point, numeric
// cells only; an empty cell is a missing value. Header names may be quoted.
using CsvCell = std::optional<double>;

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<CsvCell>> rows;

  // Index of a header name; nullopt when absent.
  std::optional<std::size_t> find(std::string_view name) const;
  // Same, throwing SchemaError when absent.
  std::size_t column(std::string_view name) const;
};

// Throws ParseError (1-based row/column; the header is row 1) for empty
// input, ragged rows or non-numeric cells.
CsvTable read_csv(std::string_view text);
CsvTable read_csv_file(const std::filesystem::path& path);

// Shortest decimal form that reads back to the same double.
std::string format_number(double value);

void write_csv(std::ostream& out, const CsvTable& table);
void write_csv_file(const std::filesystem::path& path, const CsvTable& table);

// Dataset columns: every column except `y` and `d` is a covariate, in file
// order; `x1_names` picks the conditioning covariates.
// Throws SchemaError for a missing column, a missing cell or D outside {0, 1}.
Dataset dataset_from_csv(const CsvTable& table, const std::vector<std::string>& x1_names = {"x1"});

// Columns x1..xd, y, d.
CsvTable dataset_to_csv(const Dataset& data);

}  // namespace drcate
