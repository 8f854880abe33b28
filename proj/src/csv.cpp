#include "symbayes/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "symbayes/error.hpp"

namespace symbayes {
namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  const int len = std::snprintf(buf, sizeof(buf), "%.17g", value);
  return std::string(buf, static_cast<std::size_t>(len));
}

double parse_double(const std::string& text) {
  double value = 0.0;
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    // from_chars rejects "inf"/"nan" spellings produced by printf.
    try {
      std::size_t used = 0;
      value = std::stod(text, &used);
      if (used == text.size()) return value;
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::IoError, "not a number: '" + text + "'");
  }
  return value;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return i;
  throw Error(ErrorKind::IoError, "missing column '" + name + "'");
}

void CsvTable::add_row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_double(v));
  add_text_row(std::move(cells));
}

void CsvTable::add_text_row(std::vector<std::string> cells) {
  require(cells.size() == header_.size(), ErrorKind::InvalidArgument, "row width does not match header");
  cells_.push_back(std::move(cells));
}

double CsvTable::at(std::size_t row, std::size_t col) const { return parse_double(cells_.at(row).at(col)); }

void CsvTable::write(std::ostream& out) const {
  auto write_cells = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  write_cells(header_);
  for (const auto& row : cells_) write_cells(row);
}

void CsvTable::write_file(const std::string& path) const {
  std::ofstream out(path);
  require(out.good(), ErrorKind::IoError, "cannot open " + path + " for writing");
  write(out);
  require(out.good(), ErrorKind::IoError, "write failed for " + path);
}

CsvTable CsvTable::read(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::IoError, "empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  CsvTable table(split_line(line));
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    require(cells.size() == table.header_.size(), ErrorKind::IoError,
            "row " + std::to_string(table.rows() + 1) + " has " + std::to_string(cells.size()) + " cells");
    table.cells_.push_back(std::move(cells));
  }
  return table;
}

CsvTable CsvTable::read_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::IoError, "cannot open " + path);
  return read(in);
}

}  // namespace symbayes
