#pragma once

// Matrix CSV files with axis headers:
//   # <row_axis>: v0, v1, ...
//   # <col_axis>: w0, w1, ...
//   # provenance: free text (optional, may repeat)
//   row-major values, one row per row-axis entry
// A file with only a column axis holds a single row.

#include <string>
#include <vector>

namespace qsat::data {

struct GridFile {
  std::vector<double> rows;     // empty for single-row files
  std::vector<double> columns;
  std::vector<std::vector<double>> values;
  std::string provenance;
};

/// Throws DataError with file and line information on malformed input.
GridFile read_grid(const std::string& path, const std::string& row_axis,
                   const std::string& column_axis);

void write_grid(const std::string& path, const GridFile& grid, const std::string& row_axis,
                const std::string& column_axis);

}  // namespace qsat::data
