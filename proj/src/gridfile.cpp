#include "qsat/gridfile.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "qsat/errors.hpp"

namespace qsat::data {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_numbers(const std::string& text, const std::string& where) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw DataError(where + ": empty field");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw DataError(where + ": not a number: '" + item + "'");
    }
    if (used != item.size()) throw DataError(where + ": not a number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

void check_ascending(const std::vector<double>& axis, const std::string& name,
                     const std::string& path) {
  if (!std::is_sorted(axis.begin(), axis.end()) ||
      std::adjacent_find(axis.begin(), axis.end()) != axis.end()) {
    throw DataError(path + ": axis '" + name + "' must be strictly increasing");
  }
}

}  // namespace

GridFile read_grid(const std::string& path, const std::string& row_axis,
                   const std::string& column_axis) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  GridFile grid;
  bool have_rows = false;
  bool have_cols = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = path + ":" + std::to_string(line_no);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const std::string body = trim(t.substr(1));
      const auto colon = body.find(':');
      if (colon == std::string::npos) continue;
      const std::string key = trim(body.substr(0, colon));
      const std::string value = trim(body.substr(colon + 1));
      if (key == row_axis) {
        grid.rows = parse_numbers(value, where);
        have_rows = true;
      } else if (key == column_axis) {
        grid.columns = parse_numbers(value, where);
        have_cols = true;
      } else if (key == "provenance") {
        if (!grid.provenance.empty()) grid.provenance += ' ';
        grid.provenance += value;
      }
      continue;
    }
    if (!have_cols) throw DataError(where + ": data before '# " + column_axis + ":' header");
    auto row = parse_numbers(t, where);
    if (row.size() != grid.columns.size()) {
      throw DataError(where + ": expected " + std::to_string(grid.columns.size()) +
                      " values, found " + std::to_string(row.size()));
    }
    grid.values.push_back(std::move(row));
  }
  if (!have_cols) throw DataError(path + ": missing '# " + column_axis + ":' header");
  if (grid.columns.empty()) throw DataError(path + ": empty column axis");
  check_ascending(grid.columns, column_axis, path);
  if (!row_axis.empty()) {
    if (!have_rows) throw DataError(path + ": missing '# " + row_axis + ":' header");
    check_ascending(grid.rows, row_axis, path);
    if (grid.values.size() != grid.rows.size()) {
      throw DataError(path + ": expected " + std::to_string(grid.rows.size()) + " data rows, found " +
                      std::to_string(grid.values.size()));
    }
  } else if (grid.values.size() != 1) {
    throw DataError(path + ": expected exactly one data row");
  }
  return grid;
}

void write_grid(const std::string& path, const GridFile& grid, const std::string& row_axis,
                const std::string& column_axis) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  auto join = [](const std::vector<double>& v) {
    std::ostringstream os;
    os << std::setprecision(10);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
    return os.str();
  };
  if (!grid.provenance.empty()) out << "# provenance: " << grid.provenance << '\n';
  if (!row_axis.empty()) out << "# " << row_axis << ": " << join(grid.rows) << '\n';
  out << "# " << column_axis << ": " << join(grid.columns) << '\n';
  for (const auto& row : grid.values) out << join(row) << '\n';
}

}  // namespace qsat::data
