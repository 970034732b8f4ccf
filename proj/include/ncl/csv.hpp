#pragma once

#include <string>
#include <vector>

#include "ncl/types.hpp"

namespace ncl {

/// Deterministic text form of a double: shortest fixed choice that
/// round-trips (printf %.17g). All CSV output funnels through this so
/// identical runs produce byte-identical files.
std::string format_double(double v);

/// One parsed CSV table: optional header row plus string cells.
struct CsvTable {
  std::vector<std::string> header;  // empty if the file had no header
  std::vector<std::vector<std::string>> rows;

  std::size_t column_count() const { return header.empty() ? (rows.empty() ? 0 : rows[0].size()) : header.size(); }
};

/// Reads a comma-separated, '.'-decimal, UTF-8 file. A single leading
/// header row is detected when any cell of the first line fails to parse
/// as a number. Ragged rows raise CsvError with 1-based coordinates.
CsvTable read_csv(const std::string& path);

/// Parse a cell as double; CsvError names the (row, column) on failure.
/// Coordinates are 1-based and count the header as row 1 when present.
double parse_cell(const CsvTable& table, std::size_t row, std::size_t col);

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void write_row(const std::vector<std::string>& cells);
  void close();

 private:
  struct Impl;
  Impl* impl_;
};

}  // namespace ncl
