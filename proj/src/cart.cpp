#include "cart.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace evoimpute::cart {

namespace {

double xlogx(double v) { return v > 0.0 ? v * std::log(v) : 0.0; }

// n * impurity of a node with the given class counts
double weighted_class_impurity(Impurity kind, std::span<const double> counts, double n) {
  if (n <= 0.0) return 0.0;
  if (kind == Impurity::Gini) {
    double sq = 0.0;
    for (double c : counts) sq += c * c;
    return n - sq / n;
  }
  double s = 0.0;
  for (double c : counts) s += xlogx(c);
  return xlogx(n) - s;
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;
};

}  // namespace

Tree Tree::grow(const Problem& problem, std::span<const std::size_t> rows, const GrowConfig& cfg,
                const LeafFn& leaf_fn) {
  Tree tree;
  std::vector<std::size_t> work(rows.begin(), rows.end());
  Rng rng(cfg.seed);
  tree.build(problem, work, 0, work.size(), 0, cfg, rng, leaf_fn);
  return tree;
}

int Tree::build(const Problem& p, std::vector<std::size_t>& rows, std::size_t begin, std::size_t end, int depth,
                const GrowConfig& cfg, Rng& rng, const LeafFn& leaf_fn) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  const std::size_t n = end - begin;
  const bool regression = cfg.impurity == Impurity::SquaredError;

  auto make_leaf = [&] {
    nodes_[static_cast<std::size_t>(id)].leaf = static_cast<int>(leaves_.size());
    leaves_.push_back(leaf_fn(std::span<const std::size_t>(rows.data() + begin, n)));
    return id;
  };

  // parent impurity (weighted by n)
  double parent = 0.0;
  std::vector<double> total_counts(p.n_classes, 0.0);
  double total_sum = 0.0, total_sq = 0.0;
  if (regression) {
    for (std::size_t i = begin; i < end; ++i) {
      double t = p.targets[rows[i]];
      total_sum += t;
      total_sq += t * t;
    }
    parent = total_sq - total_sum * total_sum / static_cast<double>(n);
  } else {
    for (std::size_t i = begin; i < end; ++i) total_counts[static_cast<std::size_t>(p.classes[rows[i]])] += 1.0;
    parent = weighted_class_impurity(cfg.impurity, total_counts, static_cast<double>(n));
  }

  if (static_cast<int>(n) < cfg.min_samples_split || (cfg.max_depth > 0 && depth >= cfg.max_depth) ||
      parent <= 1e-12) {
    return make_leaf();
  }

  std::vector<std::size_t> features(p.n_cols);
  std::iota(features.begin(), features.end(), std::size_t{0});
  if (cfg.max_features < 1.0) {
    auto m = static_cast<std::size_t>(std::max(1.0, std::floor(cfg.max_features * static_cast<double>(p.n_cols))));
    for (std::size_t i = 0; i < m; ++i) std::swap(features[i], features[i + uniform_index(rng, p.n_cols - i)]);
    features.resize(m);
    std::sort(features.begin(), features.end());
  }

  Split best;
  best.score = parent - 1e-12;
  std::vector<std::pair<double, std::size_t>> sorted(n);
  std::vector<double> left_counts(p.n_classes);
  std::vector<double> right_counts(p.n_classes);
  for (std::size_t f : features) {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = rows[begin + i];
      sorted[i] = {p.x[r * p.n_cols + f], r};
    }
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front().first == sorted.back().first) continue;

    std::fill(left_counts.begin(), left_counts.end(), 0.0);
    right_counts = total_counts;
    double left_sum = 0.0, left_sq = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      std::size_t r = sorted[i].second;
      if (regression) {
        double t = p.targets[r];
        left_sum += t;
        left_sq += t * t;
      } else {
        auto c = static_cast<std::size_t>(p.classes[r]);
        left_counts[c] += 1.0;
        right_counts[c] -= 1.0;
      }
      if (sorted[i].first == sorted[i + 1].first) continue;
      const auto nl = static_cast<double>(i + 1);
      const auto nr = static_cast<double>(n - i - 1);
      double score;
      if (regression) {
        double rs = total_sum - left_sum;
        double rq = total_sq - left_sq;
        score = (left_sq - left_sum * left_sum / nl) + (rq - rs * rs / nr);
      } else {
        score = weighted_class_impurity(cfg.impurity, left_counts, nl) +
                weighted_class_impurity(cfg.impurity, right_counts, nr);
      }
      if (score < best.score) {
        best.score = score;
        best.feature = static_cast<int>(f);
        best.threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
        // midpoint may round onto the upper value; keep the split strict
        if (!(best.threshold < sorted[i + 1].first)) best.threshold = sorted[i].first;
      }
    }
  }
  if (best.feature < 0) return make_leaf();

  auto f = static_cast<std::size_t>(best.feature);
  auto mid = std::stable_partition(rows.begin() + static_cast<long>(begin), rows.begin() + static_cast<long>(end),
                                   [&](std::size_t r) { return p.x[r * p.n_cols + f] <= best.threshold; });
  auto split = static_cast<std::size_t>(mid - rows.begin());

  nodes_[static_cast<std::size_t>(id)].feature = best.feature;
  nodes_[static_cast<std::size_t>(id)].threshold = best.threshold;
  int left = build(p, rows, begin, split, depth + 1, cfg, rng, leaf_fn);
  int right = build(p, rows, split, end, depth + 1, cfg, rng, leaf_fn);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

int Tree::leaf_of(std::span<const double> row) const {
  std::size_t i = 0;
  while (nodes_[i].feature >= 0) {
    const Node& node = nodes_[i];
    i = static_cast<std::size_t>(row[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right);
  }
  return nodes_[i].leaf;
}

int Tree::depth() const {
  std::vector<std::pair<std::size_t, int>> stack{{0, 0}};
  int deepest = 0;
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (nodes_[i].feature >= 0) {
      stack.push_back({static_cast<std::size_t>(nodes_[i].left), d + 1});
      stack.push_back({static_cast<std::size_t>(nodes_[i].right), d + 1});
    }
  }
  return deepest;
}

}  // namespace evoimpute::cart
