#pragma once

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "evoimpute/data_matrix.hpp"
#include "evoimpute/random.hpp"

namespace testing {

using evoimpute::DataMatrix;

inline DataMatrix make_matrix(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                              std::size_t n_classes = 2) {
  std::vector<double> values;
  for (const auto& r : rows) values.insert(values.end(), r.begin(), r.end());
  std::vector<std::string> classes;
  for (std::size_t c = 0; c < n_classes; ++c) classes.push_back("c" + std::to_string(c));
  return DataMatrix(rows.size(), rows.empty() ? 0 : rows[0].size(), values, labels, {}, classes);
}

inline DataMatrix from_csv(const std::string& text) {
  std::istringstream in(text);
  return evoimpute::read_csv(in);
}

/// Two Gaussian blobs whose means differ by `gap` in every coordinate.
inline DataMatrix blobs(std::size_t n, std::size_t p, double gap, std::uint64_t seed, std::size_t n_classes = 2) {
  evoimpute::Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> values;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    int y = static_cast<int>(i % n_classes);
    for (std::size_t c = 0; c < p; ++c) values.push_back(gap * y + noise(rng));
    labels.push_back(y);
  }
  std::vector<std::string> classes;
  for (std::size_t c = 0; c < n_classes; ++c) classes.push_back("k" + std::to_string(c));
  return DataMatrix(n, p, values, labels, {}, classes);
}

/// Equicorrelated standard normal features (correlation rho), labels by the
/// sign of the feature sum.
inline DataMatrix correlated(std::size_t n, std::size_t p, double rho, std::uint64_t seed) {
  evoimpute::Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> values;
  std::vector<int> labels;
  double a = std::sqrt(rho), b = std::sqrt(1.0 - rho);
  for (std::size_t i = 0; i < n; ++i) {
    double common = noise(rng), sum = 0.0;
    for (std::size_t c = 0; c < p; ++c) {
      double v = a * common + b * noise(rng);
      values.push_back(v);
      sum += v;
    }
    labels.push_back(sum > 0 ? 1 : 0);
  }
  return DataMatrix(n, p, values, labels, {}, {"neg", "pos"});
}

}  // namespace testing
