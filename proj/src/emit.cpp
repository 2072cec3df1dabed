#include "ersc/table.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include "ersc/util.hpp"

namespace ersc {

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw ConfigError("table row width mismatch");
  rows.push_back(std::move(row));
}

std::string Table::num(double x) { return format_g17(x); }

namespace {

bool needs_quoting(const std::string& cell) {
  return cell.find_first_of(",\"\r\n") != std::string::npos;
}

std::string csv_cell(const std::string& cell) {
  if (!needs_quoting(cell)) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_preamble(std::ostream& os, const std::string& preamble) {
  if (preamble.empty()) return;
  std::istringstream in(preamble);
  std::string line;
  while (std::getline(in, line)) os << "# " << line << "\n";
}

void emit_csv(const Table& table, std::ostream& os) {
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) os << ",";
    os << csv_cell(table.columns[c]);
  }
  os << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << ",";
      os << csv_cell(row[c]);
    }
    os << "\n";
  }
}

void emit_txt(const Table& table, std::ostream& os) {
  std::vector<std::size_t> width(table.columns.size());
  for (std::size_t c = 0; c < table.columns.size(); ++c) width[c] = table.columns[c].size();
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) os << "  ";
      os << cells[c];
      if (c + 1 < cells.size()) os << std::string(width[c] - cells[c].size(), ' ');
    }
    os << "\n";
  };
  line(table.columns);
  for (const auto& row : table.rows) line(row);
}

}  // namespace

void emit(const Table& table, std::ostream& os, const std::string& format,
          const std::string& preamble) {
  write_preamble(os, preamble);
  if (format == "csv") {
    emit_csv(table, os);
  } else if (format == "txt") {
    emit_txt(table, os);
  } else {
    throw ConfigError("unknown format '" + format + "'; supported formats: csv, txt");
  }
}

void emit_file(const Table& table, const std::string& path, const std::string& format,
               const std::string& preamble) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open output file: " + path);
  emit(table, os, format, preamble);
  os.flush();
  if (!os) throw IoError("write failed: " + path);
}

Table read_csv(std::istream& is) {
  Table table;
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.front() == '#') continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            cell += '"';
            ++i;
          } else {
            quoted = false;
          }
        } else {
          cell += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        cells.push_back(std::move(cell));
        cell.clear();
      } else {
        cell += c;
      }
    }
    cells.push_back(std::move(cell));
    if (header) {
      table.columns = std::move(cells);
      header = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

}  // namespace ersc
