#pragma once

#include <cstdint>

#include "evoimpute/data_matrix.hpp"

namespace evoimpute {

struct InjectionConfig {
  double rate = 0.07;  // fraction of feature cells to blank, in [0, 1)
  std::uint64_t seed = 0;
};

/// Number of cells inject_mcar blanks for a matrix of the given shape.
std::size_t mcar_cell_count(std::size_t n_rows, std::size_t n_cols, double rate);

/// Blanks exactly round(rate * n_rows * n_cols) feature cells, chosen
/// uniformly without replacement. Draws that would leave a row or a column
/// with no observed value are rejected and redrawn. Labels are untouched.
DataMatrix inject_mcar(const DataMatrix& data, const InjectionConfig& cfg);

}  // namespace evoimpute
