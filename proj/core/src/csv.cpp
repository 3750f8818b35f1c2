#include "snpirt/csv.hpp"

#include <fstream>
#include <sstream>

#include "snpirt/errors.hpp"

namespace snpirt {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool is_blank(const std::string& line) { return trim(line).empty(); }

} // namespace

IngestResult ingest_csv(std::istream& in) {
  std::string line;
  long file_line = 0;

  // header row
  std::vector<std::string> names;
  while (std::getline(in, line)) {
    ++file_line;
    if (is_blank(line)) continue;
    names = split_cells(line);
    break;
  }
  if (names.empty()) throw IngestionError("csv: no header row found");
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j].empty()) {
      std::ostringstream msg;
      msg << "csv: empty column name at header position " << (j + 1);
      throw IngestionError(msg.str());
    }
  }
  const std::size_t p = names.size();

  std::vector<std::vector<int>> rows;
  long rows_total = 0, rows_excluded = 0;
  while (std::getline(in, line)) {
    ++file_line;
    if (is_blank(line)) continue;
    ++rows_total;
    const auto cells = split_cells(line);
    if (cells.size() != p) {
      std::ostringstream msg;
      msg << "csv: line " << file_line << " has " << cells.size()
          << " cells, expected " << p;
      throw IngestionError(msg.str());
    }
    std::vector<int> row(p);
    bool missing = false;
    for (std::size_t j = 0; j < p; ++j) {
      const std::string& c = cells[j];
      if (c == "0") {
        row[j] = 0;
      } else if (c == "1") {
        row[j] = 1;
      } else if (c == "NA") {
        missing = true;
      } else {
        std::ostringstream msg;
        msg << "csv: cell '" << c << "' at line " << file_line << ", column '"
            << names[j] << "' is not one of 0, 1, NA";
        throw IngestionError(msg.str());
      }
    }
    if (missing) {
      ++rows_excluded;
      continue;
    }
    rows.push_back(std::move(row));
  }

  if (rows_total == 0) throw IngestionError("csv: no data rows after the header");
  if (rows.empty()) {
    std::ostringstream msg;
    msg << "csv: all " << rows_total << " rows contain NA; no complete cases remain";
    throw IngestionError(msg.str());
  }

  return IngestResult{ResponseMatrix::from_rows(rows), std::move(names), rows_total,
                      rows_excluded};
}

IngestResult ingest_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open data file: " + path);
  return ingest_csv(in);
}

} // namespace snpirt
