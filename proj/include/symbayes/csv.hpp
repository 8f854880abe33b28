#ifndef SYMBAYES_CSV_HPP
#define SYMBAYES_CSV_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace symbayes {

// 17 significant digits; round-trips every finite double.
std::string format_double(double value);
double parse_double(const std::string& text);

// Column-oriented numeric CSV with a header row. Cells may also hold text
// (see add_text_row), which numeric accessors reject.
class CsvTable {
 public:
  CsvTable() = default;
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return cells_.size(); }
  std::size_t column(const std::string& name) const;

  void add_row(const std::vector<double>& values);
  void add_text_row(std::vector<std::string> cells);

  double at(std::size_t row, std::size_t col) const;
  const std::string& text(std::size_t row, std::size_t col) const { return cells_.at(row).at(col); }

  void write(std::ostream& out) const;
  void write_file(const std::string& path) const;
  static CsvTable read(std::istream& in);
  static CsvTable read_file(const std::string& path);

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> cells_;
};

}  // namespace symbayes

#endif  // SYMBAYES_CSV_HPP
