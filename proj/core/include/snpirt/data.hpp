#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace snpirt {

// dense n x p matrix of binary responses, row major
class ResponseMatrix {
public:
  ResponseMatrix() = default;
  ResponseMatrix(int rows, int items);

  static ResponseMatrix from_rows(const std::vector<std::vector<int>>& rows);

  int rows() const { return rows_; }
  int items() const { return items_; }

  int operator()(int i, int j) const {
    return static_cast<int>(cells_[static_cast<std::size_t>(i) * items_ + j]);
  }
  void set(int i, int j, int value);

  const std::vector<std::uint8_t>& storage() const { return cells_; }
  Eigen::VectorXd item_means() const;

private:
  int rows_ = 0;
  int items_ = 0;
  std::vector<std::uint8_t> cells_;
};

} // namespace snpirt
