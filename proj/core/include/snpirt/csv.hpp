#pragma once

#include <istream>
#include <string>
#include <vector>

#include "snpirt/data.hpp"

namespace snpirt {

struct IngestResult {
  ResponseMatrix data;
  std::vector<std::string> item_names;
  long rows_total = 0;     // data rows in the file
  long rows_excluded = 0;  // dropped for missingness
};

// header line then rows of cells in {0, 1, NA}; rows containing NA are
// dropped listwise and counted
IngestResult ingest_csv(std::istream& in);
IngestResult ingest_csv_file(const std::string& path);

} // namespace snpirt
