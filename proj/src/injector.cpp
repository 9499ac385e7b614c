#include "evoimpute/injector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "evoimpute/random.hpp"

namespace evoimpute {

namespace {
constexpr int kMaxDraws = 1000;
}

std::size_t mcar_cell_count(std::size_t n_rows, std::size_t n_cols, double rate) {
  return static_cast<std::size_t>(std::llround(rate * static_cast<double>(n_rows * n_cols)));
}

DataMatrix inject_mcar(const DataMatrix& data, const InjectionConfig& cfg) {
  if (!(cfg.rate >= 0.0 && cfg.rate < 1.0)) throw DataError("missingness rate must lie in [0, 1)");
  if (!data.complete()) throw DataError("inject_mcar expects a complete matrix");

  const std::size_t rows = data.n_rows();
  const std::size_t cols = data.n_cols();
  const std::size_t cells = rows * cols;
  const std::size_t count = mcar_cell_count(rows, cols, cfg.rate);
  if (count == 0) return data;
  // every row and every column must keep one observed cell
  if (count > cells - std::max(rows, cols)) {
    throw DataError("missingness rate " + format_real(cfg.rate) +
                    " cannot be reached without emptying a row or a column");
  }

  Rng rng(cfg.seed);
  std::vector<std::size_t> pool(cells);
  std::vector<std::size_t> row_hits(rows);
  std::vector<std::size_t> col_hits(cols);
  std::vector<std::size_t> chosen;
  chosen.reserve(count);
  for (int attempt = 0; attempt < kMaxDraws; ++attempt) {
    // Draw cells uniformly without replacement. A cell that would empty its
    // row or column is set aside and another is drawn in its place; hit counts
    // only grow, so a set-aside cell can never become eligible again. If the
    // pool runs dry first, start over.
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::fill(row_hits.begin(), row_hits.end(), 0);
    std::fill(col_hits.begin(), col_hits.end(), 0);
    chosen.clear();
    std::size_t left = cells;
    while (chosen.size() < count && left > 0) {
      std::size_t j = uniform_index(rng, left);
      std::size_t cell = pool[j];
      std::swap(pool[j], pool[--left]);
      std::size_t r = cell / cols, c = cell % cols;
      if (row_hits[r] + 1 == cols || col_hits[c] + 1 == rows) continue;
      ++row_hits[r];
      ++col_hits[c];
      chosen.push_back(cell);
    }
    if (chosen.size() < count) continue;

    std::vector<double> values(data.values().begin(), data.values().end());
    for (std::size_t cell : chosen) values[cell] = kMissing;
    return data.with_features(cols, std::move(values), data.col_names());
  }
  throw DataError("could not draw a missingness pattern that keeps every row and column observed");
}

}  // namespace evoimpute
