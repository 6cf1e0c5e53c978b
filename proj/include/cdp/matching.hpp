#pragma once

#include <vector>

namespace cdp {

// Dense row-major weight table.
struct WeightMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  WeightMatrix() = default;
  WeightMatrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

struct Assignment {
  std::vector<int> col_of_row;  // -1 when a row stays unmatched
  double value = 0.0;
};

// Exact maximum-weight one-to-one assignment (Hungarian method with
// potentials). Among optimal assignments the lexicographically smallest
// col_of_row is returned. When rows exceed cols some rows stay unmatched.
Assignment max_weight_matching(const WeightMatrix& weights);

}  // namespace cdp
