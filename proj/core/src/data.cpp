#include "snpirt/data.hpp"

#include <string>

#include "snpirt/errors.hpp"

namespace snpirt {

ResponseMatrix::ResponseMatrix(int rows, int items) : rows_(rows), items_(items) {
  if (rows < 1 || items < 1)
    throw DomainError("ResponseMatrix: need at least 1 row and 1 item, got " +
                      std::to_string(rows) + " x " + std::to_string(items));
  cells_.assign(static_cast<std::size_t>(rows) * items, 0);
}

ResponseMatrix ResponseMatrix::from_rows(const std::vector<std::vector<int>>& rows) {
  if (rows.empty()) throw DomainError("ResponseMatrix: no rows");
  const int n = static_cast<int>(rows.size());
  const int p = static_cast<int>(rows.front().size());
  ResponseMatrix out(n, p);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != p)
      throw DomainError("ResponseMatrix: row " + std::to_string(i) + " has " +
                        std::to_string(rows[static_cast<std::size_t>(i)].size()) +
                        " cells, expected " + std::to_string(p));
    for (int j = 0; j < p; ++j) out.set(i, j, rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
  }
  return out;
}

void ResponseMatrix::set(int i, int j, int value) {
  if (value != 0 && value != 1)
    throw DomainError("ResponseMatrix: cell (" + std::to_string(i) + ", " +
                      std::to_string(j) + ") = " + std::to_string(value) +
                      " is not binary");
  cells_[static_cast<std::size_t>(i) * items_ + j] = static_cast<std::uint8_t>(value);
}

Eigen::VectorXd ResponseMatrix::item_means() const {
  Eigen::VectorXd means = Eigen::VectorXd::Zero(items_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < items_; ++j) means[j] += (*this)(i, j);
  means /= static_cast<double>(rows_);
  return means;
}

} // namespace snpirt
