#include "ncl/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ncl/errors.hpp"

namespace ncl {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

bool parses_as_number(const std::string& s) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  (void)std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size();
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  // Trim surrounding spaces per cell.
  for (auto& c : cells) {
    const auto b = c.find_first_not_of(" \t");
    const auto e = c.find_last_not_of(" \t");
    c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
  }
  return cells;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open CSV file: " + path);

  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  std::size_t expected_cols = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    std::vector<std::string> cells = split_line(line);
    if (lineno == 1) {
      expected_cols = cells.size();
      bool all_numeric = true;
      for (const auto& c : cells)
        if (!parses_as_number(c)) all_numeric = false;
      if (!all_numeric) {
        table.header = std::move(cells);
        continue;
      }
    }
    if (cells.size() != expected_cols)
      throw CsvError(path + ": row " + std::to_string(lineno) + " has " +
                     std::to_string(cells.size()) + " cells, expected " +
                     std::to_string(expected_cols));
    table.rows.push_back(std::move(cells));
  }
  return table;
}

double parse_cell(const CsvTable& table, std::size_t row, std::size_t col) {
  const std::vector<std::string>& cells = table.rows.at(row);
  const std::size_t file_row = row + 1 + (table.header.empty() ? 0 : 1);
  if (col >= cells.size() || cells[col].empty())
    throw CsvError("missing cell at row " + std::to_string(file_row) + ", column " +
                   std::to_string(col + 1));
  if (!parses_as_number(cells[col]))
    throw CsvError("non-numeric cell '" + cells[col] + "' at row " + std::to_string(file_row) +
                   ", column " + std::to_string(col + 1));
  return std::strtod(cells[col].c_str(), nullptr);
}

struct CsvWriter::Impl {
  std::ofstream out;
  std::string path;
};

CsvWriter::CsvWriter(const std::string& path) : impl_(new Impl) {
  impl_->path = path;
  impl_->out.open(path, std::ios::trunc);
  if (!impl_->out) {
    delete impl_;
    throw CsvError("cannot open for writing: " + path);
  }
}

CsvWriter::~CsvWriter() {
  close();
  delete impl_;
}

void CsvWriter::write_row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) impl_->out << ',';
    impl_->out << cells[i];
  }
  impl_->out << '\n';
}

void CsvWriter::close() {
  if (impl_->out.is_open()) impl_->out.close();
}

}  // namespace ncl
