#ifndef ERSC_TABLE_HPP
#define ERSC_TABLE_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace ersc {

/// Column-named result table; cells are preformatted strings so numeric
/// output is bit-for-bit reproducible.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  static std::string num(double x);  // 17 significant digits
};

/// Writes a table as RFC-4180-style CSV (header row, quoting when needed)
/// or aligned text. The preamble is echoed line by line as '#' comments.
void emit(const Table& table, std::ostream& os, const std::string& format,
          const std::string& preamble);

/// Writes to a file; IoError on failure.
void emit_file(const Table& table, const std::string& path, const std::string& format,
               const std::string& preamble);

/// Reads back a CSV produced by emit (comment lines skipped).
Table read_csv(std::istream& is);

}  // namespace ersc

#endif  // ERSC_TABLE_HPP
