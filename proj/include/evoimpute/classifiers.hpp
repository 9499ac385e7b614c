#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "evoimpute/data_matrix.hpp"

namespace evoimpute {

enum class ClassifierKind { KNN, GaussianNB, MultinomialNB, DecisionTree, RandomForest, LogisticRegression, GradientBoosting };

std::string_view classifier_name(ClassifierKind kind);
/// Accepts the enum names and the long scikit-style aliases
/// (e.g. `KNeighborsClassifier`).
std::optional<ClassifierKind> classifier_from_name(std::string_view name);

enum class SplitCriterion { Gini, Entropy };

struct KnnHyper {
  int n_neighbors = 5;
  int p = 2;  // Minkowski exponent, 1 or 2
  bool distance_weights = false;
};

struct GaussianNBHyper {};

struct MultinomialNBHyper {
  double alpha = 1.0;
  bool fit_prior = true;
};

struct TreeHyper {
  SplitCriterion criterion = SplitCriterion::Gini;
  int max_depth = 0;  // 0: unlimited
  int min_samples_split = 2;
  double max_features = 1.0;  // fraction of columns tried at each split
};

struct ForestHyper {
  int n_estimators = 100;
  TreeHyper tree{SplitCriterion::Gini, 0, 2, 0.5};
  bool bootstrap = true;
};

struct LogisticHyper {
  double C = 1.0;
  int max_iter = 300;
  double tol = 1e-6;
};

struct BoostingHyper {
  int n_estimators = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
};

using ClassifierHyper =
    std::variant<KnnHyper, GaussianNBHyper, MultinomialNBHyper, TreeHyper, ForestHyper, LogisticHyper, BoostingHyper>;

ClassifierKind kind_of(const ClassifierHyper& hyper);

class ClassifierModel {
 public:
  struct State;

  ClassifierModel(ClassifierKind kind, std::size_t n_cols, std::size_t n_classes, std::shared_ptr<const State> state);

  ClassifierKind kind() const { return kind_; }
  std::size_t n_cols() const { return n_cols_; }
  std::size_t n_classes() const { return n_classes_; }

  /// n_rows × n_classes; rows are non-negative and sum to one.
  Eigen::MatrixXd predict_proba(const DataMatrix& data) const;
  /// Arg-max of predict_proba, ties to the lower class id.
  std::vector<int> predict(const DataMatrix& data) const;

  /// GradientBoosting only: training loss before the first stage and after
  /// each stage (summed over one-vs-rest ensembles).
  std::vector<double> training_loss() const;

 private:
  ClassifierKind kind_;
  std::size_t n_cols_;
  std::size_t n_classes_;
  std::shared_ptr<const State> state_;
};

/// Throws DataError on a single-class training set, on incomplete input, and
/// (MultinomialNB) on any negative feature value.
ClassifierModel fit_classifier(const DataMatrix& data, const ClassifierHyper& hyper, std::uint64_t seed = 0);

double accuracy(std::span<const int> predicted, std::span<const int> truth);

}  // namespace evoimpute
