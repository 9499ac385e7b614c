#pragma once

// Greedy CART used by DecisionTree, RandomForest and GradientBoosting.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "evoimpute/random.hpp"

namespace evoimpute::cart {

enum class Impurity { Gini, Entropy, SquaredError };

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf = -1;  // index into the tree's leaf payloads
};

struct GrowConfig {
  Impurity impurity = Impurity::Gini;
  int max_depth = 0;  // 0: unlimited
  int min_samples_split = 2;
  double max_features = 1.0;  // fraction of columns tried per split
  std::uint64_t seed = 0;
};

/// Row-major feature view; `targets` are class ids (classification) or
/// real residuals (regression).
struct Problem {
  std::span<const double> x;
  std::size_t n_cols = 0;
  std::span<const int> classes;
  std::size_t n_classes = 0;
  std::span<const double> targets;
};

class Tree {
 public:
  /// Leaf payload for the rows that reached it.
  using LeafFn = std::function<std::vector<double>(std::span<const std::size_t> rows)>;

  static Tree grow(const Problem& problem, std::span<const std::size_t> rows, const GrowConfig& cfg,
                   const LeafFn& leaf_fn);

  int leaf_of(std::span<const double> row) const;
  const std::vector<double>& payload(int leaf) const { return leaves_[static_cast<std::size_t>(leaf)]; }
  std::vector<double>& payload(int leaf) { return leaves_[static_cast<std::size_t>(leaf)]; }
  std::size_t n_leaves() const { return leaves_.size(); }
  std::size_t n_nodes() const { return nodes_.size(); }
  int depth() const;

 private:
  int build(const Problem& p, std::vector<std::size_t>& rows, std::size_t begin, std::size_t end, int depth,
            const GrowConfig& cfg, Rng& rng, const LeafFn& leaf_fn);

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> leaves_;
};

}  // namespace evoimpute::cart
