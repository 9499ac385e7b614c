#include "evoimpute/classifiers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "cart.hpp"
#include "evoimpute/random.hpp"

namespace evoimpute {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

constexpr std::array<std::pair<ClassifierKind, std::string_view>, 7> kNames{{
    {ClassifierKind::KNN, "KNN"},
    {ClassifierKind::GaussianNB, "GaussianNB"},
    {ClassifierKind::MultinomialNB, "MultinomialNB"},
    {ClassifierKind::DecisionTree, "DecisionTree"},
    {ClassifierKind::RandomForest, "RandomForest"},
    {ClassifierKind::LogisticRegression, "LogisticRegression"},
    {ClassifierKind::GradientBoosting, "GradientBoosting"},
}};

constexpr std::array<std::pair<ClassifierKind, std::string_view>, 4> kAliases{{
    {ClassifierKind::KNN, "KNeighborsClassifier"},
    {ClassifierKind::DecisionTree, "DecisionTreeClassifier"},
    {ClassifierKind::RandomForest, "RandomForestClassifier"},
    {ClassifierKind::GradientBoosting, "GradientBoostingClassifier"},
}};

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> as_eigen(const DataMatrix& d) {
  return {d.values().data(), static_cast<Eigen::Index>(d.n_rows()), static_cast<Eigen::Index>(d.n_cols())};
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void normalize_log_rows(Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double top = m.row(r).maxCoeff();
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = m(r, c) == kNegInf ? 0.0 : std::exp(m(r, c) - top);
    m.row(r) /= m.row(r).sum();
  }
}

void normalize_rows(Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double s = m.row(r).sum();
    if (s > 0.0) {
      m.row(r) /= s;
    } else {
      m.row(r).setConstant(1.0 / static_cast<double>(m.cols()));
    }
  }
}

std::vector<int> present_classes(const DataMatrix& d) {
  std::vector<std::size_t> counts = d.class_counts();
  std::vector<int> present;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c]) present.push_back(static_cast<int>(c));
  }
  return present;
}

// ----------------------------------------------------------- per-kind state

struct KnnState {
  KnnHyper hyper;
  std::vector<double> x;
  std::vector<int> y;
  std::size_t n = 0;
};

struct GaussianNBState {
  Eigen::MatrixXd mean;  // classes × cols
  Eigen::MatrixXd var;
  Eigen::VectorXd log_prior;
};

struct MultinomialNBState {
  Eigen::MatrixXd log_prob;  // classes × cols
  Eigen::VectorXd log_prior;
};

struct TreeState {
  std::vector<cart::Tree> trees;  // leaf payload: class distribution
};

struct LogisticState {
  // one row per binary problem; `positive[k]` is the class it scores
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
  std::vector<int> positive;
  int negative = -1;  // set when there is a single binary problem
  Eigen::VectorXd center, scale;
};

struct BoostingEnsemble {
  int positive = -1;
  double init = 0.0;
  std::vector<cart::Tree> stages;  // leaf payload: {shrunken step}
};

struct BoostingState {
  std::vector<BoostingEnsemble> ensembles;
  int negative = -1;
  std::vector<double> loss;
};

}  // namespace

struct ClassifierModel::State {
  std::variant<KnnState, GaussianNBState, MultinomialNBState, TreeState, LogisticState, BoostingState> s;
};

namespace {

// ----------------------------------------------------------- KNN

Eigen::MatrixXd knn_proba(const KnnState& st, const DataMatrix& d, std::size_t k_classes) {
  const std::size_t p = d.n_cols();
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::max(st.hyper.n_neighbors, 1)), st.n);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.n_rows()), static_cast<Eigen::Index>(k_classes));
  std::vector<std::pair<double, std::size_t>> dist(st.n);
  for (std::size_t r = 0; r < d.n_rows(); ++r) {
    auto q = d.row(r);
    for (std::size_t i = 0; i < st.n; ++i) {
      double acc = 0.0;
      const double* t = st.x.data() + i * p;
      for (std::size_t c = 0; c < p; ++c) {
        double diff = q[c] - t[c];
        acc += st.hyper.p == 1 ? std::abs(diff) : diff * diff;
      }
      dist[i] = {st.hyper.p == 1 ? acc : std::sqrt(acc), i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k), dist.end());
    bool exact = st.hyper.distance_weights && dist[0].first == 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double w = 1.0;
      if (st.hyper.distance_weights) {
        if (exact) {
          if (dist[j].first != 0.0) continue;
        } else {
          w = 1.0 / dist[j].first;
        }
      }
      out(static_cast<Eigen::Index>(r), st.y[dist[j].second]) += w;
    }
  }
  normalize_rows(out);
  return out;
}

// ----------------------------------------------------------- naive Bayes

GaussianNBState fit_gaussian_nb(const DataMatrix& d) {
  const auto k = static_cast<Eigen::Index>(d.n_classes());
  const auto p = static_cast<Eigen::Index>(d.n_cols());
  GaussianNBState st{Eigen::MatrixXd::Zero(k, p), Eigen::MatrixXd::Zero(k, p), Eigen::VectorXd::Constant(k, kNegInf)};
  std::vector<std::size_t> counts = d.class_counts();
  auto x = as_eigen(d);
  for (Eigen::Index r = 0; r < x.rows(); ++r) st.mean.row(d.label(static_cast<std::size_t>(r))) += x.row(r);
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)]) st.mean.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  }
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    int y = d.label(static_cast<std::size_t>(r));
    st.var.row(y).array() += (x.row(r) - st.mean.row(y)).array().square();
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    auto n = static_cast<double>(counts[static_cast<std::size_t>(c)]);
    if (n == 0) continue;
    st.var.row(c) = (st.var.row(c) / n).cwiseMax(1e-9);
    st.log_prior(c) = std::log(n / static_cast<double>(d.n_rows()));
  }
  return st;
}

Eigen::MatrixXd gaussian_nb_proba(const GaussianNBState& st, const DataMatrix& d) {
  const Eigen::Index k = st.mean.rows();
  auto x = as_eigen(d);
  Eigen::MatrixXd out(x.rows(), k);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < k; ++c) {
      if (st.log_prior(c) == kNegInf) {
        out(r, c) = kNegInf;
        continue;
      }
      double ll = st.log_prior(c);
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        double v = st.var(c, j);
        double dev = x(r, j) - st.mean(c, j);
        ll += -0.5 * (log2pi + std::log(v) + dev * dev / v);
      }
      out(r, c) = ll;
    }
  }
  normalize_log_rows(out);
  return out;
}

MultinomialNBState fit_multinomial_nb(const DataMatrix& d, const MultinomialNBHyper& h) {
  for (double v : d.values()) {
    if (v < 0.0) throw DataError("MultinomialNB requires non-negative features");
  }
  if (!(h.alpha > 0.0)) throw DataError("MultinomialNB: alpha must be positive");
  const auto k = static_cast<Eigen::Index>(d.n_classes());
  const auto p = static_cast<Eigen::Index>(d.n_cols());
  MultinomialNBState st{Eigen::MatrixXd::Constant(k, p, kNegInf), Eigen::VectorXd::Constant(k, kNegInf)};
  Eigen::MatrixXd feature_count = Eigen::MatrixXd::Zero(k, p);
  auto x = as_eigen(d);
  for (Eigen::Index r = 0; r < x.rows(); ++r) feature_count.row(d.label(static_cast<std::size_t>(r))) += x.row(r);
  std::vector<std::size_t> counts = d.class_counts();
  std::vector<int> present = present_classes(d);
  for (int c : present) {
    double denom = feature_count.row(c).sum() + h.alpha * static_cast<double>(p);
    for (Eigen::Index j = 0; j < p; ++j) st.log_prob(c, j) = std::log((feature_count(c, j) + h.alpha) / denom);
    st.log_prior(c) = h.fit_prior ? std::log(static_cast<double>(counts[static_cast<std::size_t>(c)]) /
                                             static_cast<double>(d.n_rows()))
                                  : -std::log(static_cast<double>(present.size()));
  }
  return st;
}

Eigen::MatrixXd multinomial_nb_proba(const MultinomialNBState& st, const DataMatrix& d) {
  auto x = as_eigen(d);
  const Eigen::Index k = st.log_prob.rows();
  Eigen::MatrixXd out(x.rows(), k);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < k; ++c) {
      if (st.log_prior(c) == kNegInf) {
        out(r, c) = kNegInf;
        continue;
      }
      out(r, c) = st.log_prior(c) + x.row(r).dot(st.log_prob.row(c));
    }
  }
  normalize_log_rows(out);
  return out;
}

// ----------------------------------------------------------- trees

cart::Impurity impurity_of(SplitCriterion c) {
  return c == SplitCriterion::Gini ? cart::Impurity::Gini : cart::Impurity::Entropy;
}

void check_tree_hyper(const TreeHyper& h) {
  if (h.max_depth < 0) throw DataError("tree: max_depth must be >= 0");
  if (h.min_samples_split < 2) throw DataError("tree: min_samples_split must be >= 2");
  if (!(h.max_features > 0.0 && h.max_features <= 1.0)) throw DataError("tree: max_features must lie in (0, 1]");
}

cart::Tree grow_classification_tree(const DataMatrix& d, std::span<const std::size_t> rows, const TreeHyper& h,
                                    std::uint64_t seed) {
  cart::Problem prob{d.values(), d.n_cols(), d.labels(), d.n_classes(), {}};
  cart::GrowConfig cfg{impurity_of(h.criterion), h.max_depth, h.min_samples_split, h.max_features, seed};
  const std::size_t k = d.n_classes();
  return cart::Tree::grow(prob, rows, cfg, [&](std::span<const std::size_t> leaf_rows) {
    std::vector<double> dist(k, 0.0);
    for (std::size_t r : leaf_rows) dist[static_cast<std::size_t>(d.label(r))] += 1.0;
    for (double& v : dist) v /= static_cast<double>(leaf_rows.size());
    return dist;
  });
}

TreeState fit_forest(const DataMatrix& d, const ForestHyper& h, std::uint64_t seed) {
  if (h.n_estimators < 1) throw DataError("RandomForest: n_estimators must be >= 1");
  check_tree_hyper(h.tree);
  TreeState st;
  const std::size_t n = d.n_rows();
  for (int t = 0; t < h.n_estimators; ++t) {
    std::uint64_t tree_seed = derive_seed(seed, static_cast<std::uint64_t>(t));
    std::vector<std::size_t> rows(n);
    if (h.bootstrap) {
      Rng rng(derive_seed(tree_seed, 0xb007));
      for (auto& r : rows) r = uniform_index(rng, n);
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    st.trees.push_back(grow_classification_tree(d, rows, h.tree, tree_seed));
  }
  return st;
}

Eigen::MatrixXd tree_proba(const TreeState& st, const DataMatrix& d, std::size_t k) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.n_rows()), static_cast<Eigen::Index>(k));
  for (const auto& tree : st.trees) {
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
      const auto& dist = tree.payload(tree.leaf_of(d.row(r)));
      for (std::size_t c = 0; c < k; ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) += dist[c];
    }
  }
  normalize_rows(out);
  return out;
}

// ----------------------------------------------------------- logistic regression

// L2-penalized binary logistic loss on standardized inputs, minimized by
// gradient descent with Armijo backtracking. Returns (w, b).
std::pair<Eigen::VectorXd, double> fit_binary_logistic(const Eigen::MatrixXd& z, const Eigen::VectorXd& y01,
                                                       const LogisticHyper& h) {
  const Eigen::Index n = z.rows();
  const Eigen::Index p = z.cols();
  const double lambda = 1.0 / (h.C * static_cast<double>(n));
  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  double b = 0.0;
  Eigen::VectorXd sign = 2.0 * y01.array() - 1.0;

  auto objective = [&](const Eigen::VectorXd& ww, double bb) {
    Eigen::VectorXd margin = ((z * ww).array() + bb) * sign.array();
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) loss += softplus(-margin(i));
    return loss / static_cast<double>(n) + 0.5 * lambda * ww.squaredNorm();
  };

  double f = objective(w, b);
  double step = 1.0;
  for (int it = 0; it < h.max_iter; ++it) {
    Eigen::VectorXd scores = (z * w).array() + b;
    Eigen::VectorXd resid(n);
    for (Eigen::Index i = 0; i < n; ++i) resid(i) = sigmoid(scores(i)) - y01(i);
    Eigen::VectorXd gw = z.transpose() * resid / static_cast<double>(n) + lambda * w;
    double gb = resid.mean();
    double gnorm2 = gw.squaredNorm() + gb * gb;
    if (std::sqrt(gnorm2) < h.tol) break;
    step = std::min(step * 2.0, 1e3);
    for (int ls = 0; ls < 50; ++ls) {
      Eigen::VectorXd w_try = w - step * gw;
      double b_try = b - step * gb;
      double f_try = objective(w_try, b_try);
      if (f_try <= f - 0.5 * step * gnorm2) {
        w = std::move(w_try);
        b = b_try;
        f = f_try;
        break;
      }
      step *= 0.5;
    }
  }
  return {w, b};
}

LogisticState fit_logistic(const DataMatrix& d, const LogisticHyper& h) {
  if (!(h.C > 0.0)) throw DataError("LogisticRegression: C must be positive");
  auto x = as_eigen(d);
  LogisticState st;
  st.center = x.colwise().mean().transpose();
  st.scale = ((x.rowwise() - st.center.transpose()).array().square().colwise().mean()).sqrt().transpose();
  for (Eigen::Index j = 0; j < st.scale.size(); ++j) {
    if (!(st.scale(j) > 0.0)) st.scale(j) = 1.0;
  }
  Eigen::MatrixXd z = (x.rowwise() - st.center.transpose()).array().rowwise() / st.scale.transpose().array();

  std::vector<int> present = present_classes(d);
  std::vector<int> targets = present;
  if (present.size() == 2) {
    st.negative = present[0];
    targets = {present[1]};
  }
  st.weights.resize(static_cast<Eigen::Index>(targets.size()), x.cols());
  st.bias.resize(static_cast<Eigen::Index>(targets.size()));
  for (std::size_t t = 0; t < targets.size(); ++t) {
    Eigen::VectorXd y(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) y(r) = d.label(static_cast<std::size_t>(r)) == targets[t] ? 1.0 : 0.0;
    auto [w, b] = fit_binary_logistic(z, y, h);
    st.weights.row(static_cast<Eigen::Index>(t)) = w.transpose();
    st.bias(static_cast<Eigen::Index>(t)) = b;
  }
  st.positive = std::move(targets);
  return st;
}

Eigen::MatrixXd logistic_proba(const LogisticState& st, const DataMatrix& d, std::size_t k) {
  auto x = as_eigen(d);
  Eigen::MatrixXd z = (x.rowwise() - st.center.transpose()).array().rowwise() / st.scale.transpose().array();
  Eigen::MatrixXd scores = (z * st.weights.transpose()).rowwise() + st.bias.transpose();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.rows(), static_cast<Eigen::Index>(k));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (st.negative >= 0) {
      double pos = sigmoid(scores(r, 0));
      out(r, st.positive[0]) = pos;
      out(r, st.negative) = 1.0 - pos;
    } else {
      for (std::size_t t = 0; t < st.positive.size(); ++t) {
        out(r, st.positive[t]) = sigmoid(scores(r, static_cast<Eigen::Index>(t)));
      }
    }
  }
  normalize_rows(out);
  return out;
}

// ----------------------------------------------------------- gradient boosting

double ensemble_loss(const Eigen::VectorXd& f, const Eigen::VectorXd& y) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) loss += softplus(f(i)) - y(i) * f(i);
  return loss / static_cast<double>(f.size());
}

BoostingState fit_boosting(const DataMatrix& d, const BoostingHyper& h) {
  if (h.n_estimators < 1) throw DataError("GradientBoosting: n_estimators must be >= 1");
  if (h.max_depth < 1) throw DataError("GradientBoosting: max_depth must be >= 1");
  if (!(h.learning_rate > 0.0)) throw DataError("GradientBoosting: learning_rate must be positive");
  const std::size_t n = d.n_rows();
  std::vector<int> present = present_classes(d);
  std::vector<int> targets = present;
  BoostingState st;
  if (present.size() == 2) {
    st.negative = present[0];
    targets = {present[1]};
  }

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<Eigen::VectorXd> f(targets.size());
  std::vector<Eigen::VectorXd> y(targets.size());
  std::vector<double> current_loss(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    BoostingEnsemble ens;
    ens.positive = targets[t];
    y[t].resize(static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) y[t](static_cast<Eigen::Index>(r)) = d.label(r) == targets[t] ? 1.0 : 0.0;
    double prior = std::clamp(y[t].mean(), 1e-6, 1.0 - 1e-6);
    ens.init = std::log(prior / (1.0 - prior));
    f[t] = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), ens.init);
    current_loss[t] = ensemble_loss(f[t], y[t]);
    st.ensembles.push_back(std::move(ens));
  }
  st.loss.push_back(std::accumulate(current_loss.begin(), current_loss.end(), 0.0));

  std::vector<double> resid(n);
  std::vector<double> hess(n);
  for (int stage = 0; stage < h.n_estimators; ++stage) {
    for (std::size_t t = 0; t < targets.size(); ++t) {
      for (std::size_t r = 0; r < n; ++r) {
        double pr = sigmoid(f[t](static_cast<Eigen::Index>(r)));
        resid[r] = y[t](static_cast<Eigen::Index>(r)) - pr;
        hess[r] = pr * (1.0 - pr);
      }
      cart::Problem prob{d.values(), d.n_cols(), {}, 0, resid};
      cart::GrowConfig cfg{cart::Impurity::SquaredError, h.max_depth, 2, 1.0, 0};
      cart::Tree tree = cart::Tree::grow(prob, all, cfg, [&](std::span<const std::size_t> rows) {
        double num = 0.0, den = 0.0;
        for (std::size_t r : rows) {
          num += resid[r];
          den += hess[r];
        }
        return std::vector<double>{den > 1e-12 ? num / den : 0.0};
      });
      std::vector<int> leaf(n);
      for (std::size_t r = 0; r < n; ++r) leaf[r] = tree.leaf_of(d.row(r));

      // Shrink the step until the loss does not increase.
      double shrink = h.learning_rate;
      Eigen::VectorXd trial(static_cast<Eigen::Index>(n));
      double trial_loss = current_loss[t];
      for (int attempt = 0; attempt < 30; ++attempt) {
        for (std::size_t r = 0; r < n; ++r) {
          trial(static_cast<Eigen::Index>(r)) = f[t](static_cast<Eigen::Index>(r)) + shrink * tree.payload(leaf[r])[0];
        }
        trial_loss = ensemble_loss(trial, y[t]);
        if (trial_loss <= current_loss[t]) break;
        shrink *= 0.5;
      }
      if (trial_loss > current_loss[t]) {
        shrink = 0.0;
      } else {
        f[t] = trial;
        current_loss[t] = trial_loss;
      }
      for (std::size_t l = 0; l < tree.n_leaves(); ++l) tree.payload(static_cast<int>(l))[0] *= shrink;
      st.ensembles[t].stages.push_back(std::move(tree));
    }
    st.loss.push_back(std::accumulate(current_loss.begin(), current_loss.end(), 0.0));
  }
  return st;
}

Eigen::MatrixXd boosting_proba(const BoostingState& st, const DataMatrix& d, std::size_t k) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.n_rows()), static_cast<Eigen::Index>(k));
  for (std::size_t r = 0; r < d.n_rows(); ++r) {
    auto row = d.row(r);
    for (const auto& ens : st.ensembles) {
      double score = ens.init;
      for (const auto& tree : ens.stages) score += tree.payload(tree.leaf_of(row))[0];
      double pos = sigmoid(score);
      out(static_cast<Eigen::Index>(r), ens.positive) = pos;
      if (st.negative >= 0) out(static_cast<Eigen::Index>(r), st.negative) = 1.0 - pos;
    }
  }
  normalize_rows(out);
  return out;
}

}  // namespace

std::string_view classifier_name(ClassifierKind kind) {
  for (auto [k, name] : kNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<ClassifierKind> classifier_from_name(std::string_view name) {
  for (auto [k, n] : kNames) {
    if (n == name) return k;
  }
  for (auto [k, n] : kAliases) {
    if (n == name) return k;
  }
  return std::nullopt;
}

ClassifierKind kind_of(const ClassifierHyper& hyper) { return static_cast<ClassifierKind>(hyper.index()); }

ClassifierModel::ClassifierModel(ClassifierKind kind, std::size_t n_cols, std::size_t n_classes,
                                 std::shared_ptr<const State> state)
    : kind_(kind), n_cols_(n_cols), n_classes_(n_classes), state_(std::move(state)) {}

Eigen::MatrixXd ClassifierModel::predict_proba(const DataMatrix& data) const {
  if (data.n_cols() != n_cols_) {
    throw DataError(std::string(classifier_name(kind_)) + ": fitted on " + std::to_string(n_cols_) +
                    " columns, got " + std::to_string(data.n_cols()));
  }
  if (!data.complete()) throw DataError(std::string(classifier_name(kind_)) + " requires complete data");
  return std::visit(
      [&](const auto& st) -> Eigen::MatrixXd {
        using T = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<T, KnnState>) {
          return knn_proba(st, data, n_classes_);
        } else if constexpr (std::is_same_v<T, GaussianNBState>) {
          return gaussian_nb_proba(st, data);
        } else if constexpr (std::is_same_v<T, MultinomialNBState>) {
          return multinomial_nb_proba(st, data);
        } else if constexpr (std::is_same_v<T, TreeState>) {
          return tree_proba(st, data, n_classes_);
        } else if constexpr (std::is_same_v<T, LogisticState>) {
          return logistic_proba(st, data, n_classes_);
        } else {
          return boosting_proba(st, data, n_classes_);
        }
      },
      state_->s);
}

std::vector<int> ClassifierModel::predict(const DataMatrix& data) const {
  Eigen::MatrixXd proba = predict_proba(data);
  std::vector<int> out(static_cast<std::size_t>(proba.rows()));
  for (Eigen::Index r = 0; r < proba.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < proba.cols(); ++c) {
      if (proba(r, c) > proba(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

std::vector<double> ClassifierModel::training_loss() const {
  if (const auto* st = std::get_if<BoostingState>(&state_->s)) return st->loss;
  return {};
}

ClassifierModel fit_classifier(const DataMatrix& data, const ClassifierHyper& hyper, std::uint64_t seed) {
  const ClassifierKind kind = kind_of(hyper);
  if (!data.complete()) throw DataError(std::string(classifier_name(kind)) + " requires complete data");
  if (present_classes(data).size() < 2) throw DataError("training data contains a single class");

  auto state = std::make_shared<ClassifierModel::State>();
  std::visit(
      [&](const auto& h) {
        using T = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<T, KnnHyper>) {
          if (h.n_neighbors < 1) throw DataError("KNN: n_neighbors must be >= 1");
          if (h.p != 1 && h.p != 2) throw DataError("KNN: p must be 1 or 2");
          state->s = KnnState{h, std::vector<double>(data.values().begin(), data.values().end()),
                              std::vector<int>(data.labels().begin(), data.labels().end()), data.n_rows()};
        } else if constexpr (std::is_same_v<T, GaussianNBHyper>) {
          state->s = fit_gaussian_nb(data);
        } else if constexpr (std::is_same_v<T, MultinomialNBHyper>) {
          state->s = fit_multinomial_nb(data, h);
        } else if constexpr (std::is_same_v<T, TreeHyper>) {
          check_tree_hyper(h);
          std::vector<std::size_t> rows(data.n_rows());
          std::iota(rows.begin(), rows.end(), std::size_t{0});
          TreeState st;
          st.trees.push_back(grow_classification_tree(data, rows, h, derive_seed(seed, 0)));
          state->s = std::move(st);
        } else if constexpr (std::is_same_v<T, ForestHyper>) {
          state->s = fit_forest(data, h, seed);
        } else if constexpr (std::is_same_v<T, LogisticHyper>) {
          state->s = fit_logistic(data, h);
        } else {
          state->s = fit_boosting(data, h);
        }
      },
      hyper);
  return ClassifierModel(kind, data.n_cols(), data.n_classes(), std::move(state));
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size() || truth.empty()) throw DataError("accuracy: length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace evoimpute
