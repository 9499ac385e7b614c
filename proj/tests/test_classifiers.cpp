#include <doctest.h>

#include <cmath>

#include "evoimpute/classifiers.hpp"
#include "support.hpp"

using namespace evoimpute;
using testing::make_matrix;

namespace {

std::vector<ClassifierHyper> every_kind() {
  ForestHyper forest;
  forest.n_estimators = 10;
  BoostingHyper boost;
  boost.n_estimators = 10;
  return {KnnHyper{}, GaussianNBHyper{}, MultinomialNBHyper{}, TreeHyper{}, forest, LogisticHyper{}, boost};
}

DataMatrix shift_positive(const DataMatrix& d, double by) {
  std::vector<double> v(d.values().begin(), d.values().end());
  for (double& x : v) x += by;
  return DataMatrix(d.n_rows(), d.n_cols(), v, std::vector<int>(d.labels().begin(), d.labels().end()), {},
                    d.class_names());
}

DataMatrix scaled(const DataMatrix& d, double by) {
  std::vector<double> v(d.values().begin(), d.values().end());
  for (double& x : v) x *= by;
  return DataMatrix(d.n_rows(), d.n_cols(), v, std::vector<int>(d.labels().begin(), d.labels().end()), {},
                    d.class_names());
}

double train_accuracy(const ClassifierModel& m, const DataMatrix& d) {
  auto pred = m.predict(d);
  return accuracy(pred, d.labels());
}

}  // namespace

TEST_CASE("KNN with one neighbour recalls its training points") {
  DataMatrix d = testing::blobs(60, 3, 0.5, 5);
  KnnHyper h;
  h.n_neighbors = 1;
  CHECK(train_accuracy(fit_classifier(d, h), d) == 1.0);
}

TEST_CASE("KNN distance ties go to the earlier training row") {
  // the query sits exactly between a class-1 point (row 0) and a class-0 point (row 1)
  DataMatrix d = make_matrix({{-1.0}, {1.0}, {5.0}}, {1, 0, 0});
  KnnHyper h;
  h.n_neighbors = 1;
  CHECK(fit_classifier(d, h).predict(make_matrix({{0.0}}, {0}))[0] == 1);
}

TEST_CASE("KNN distance weighting and Manhattan metric") {
  DataMatrix d = make_matrix({{0, 0}, {3, 0}, {0, 4}}, {0, 1, 1});
  KnnHyper h;
  h.n_neighbors = 3;
  CHECK(fit_classifier(d, h).predict(make_matrix({{0.1, 0.1}}, {0}))[0] == 1);  // 2 of 3 votes
  h.distance_weights = true;
  CHECK(fit_classifier(d, h).predict(make_matrix({{0.1, 0.1}}, {0}))[0] == 0);  // nearest dominates
  // from the origin (3,0) is nearer under L1 and (2,2) is nearer under L2
  DataMatrix e = make_matrix({{3, 0}, {2, 2}}, {0, 1});
  h.n_neighbors = 1;
  h.distance_weights = false;
  CHECK(fit_classifier(e, h).predict(make_matrix({{0, 0}}, {0}))[0] == 1);
  h.p = 1;
  CHECK(fit_classifier(e, h).predict(make_matrix({{0, 0}}, {0}))[0] == 0);
}

TEST_CASE("property: uniform KNN is unchanged by a common positive rescaling") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    DataMatrix train = testing::blobs(40, 3, 1.0, rng()), test = testing::blobs(20, 3, 1.0, rng());
    KnnHyper h;
    h.n_neighbors = 1 + static_cast<int>(uniform_index(rng, 10));
    h.p = 1 + static_cast<int>(uniform_index(rng, 2));
    double s = 0.5 + 10.0 * uniform01(rng);
    REQUIRE(fit_classifier(train, h).predict(test) == fit_classifier(scaled(train, s), h).predict(scaled(test, s)));
  }
}

TEST_CASE("GaussianNB is near the Bayes rate on separated classes") {
  DataMatrix train = testing::blobs(500, 1, 6.0, 11), test = testing::blobs(500, 1, 6.0, 12);
  auto model = fit_classifier(train, GaussianNBHyper{});
  CHECK(accuracy(model.predict(test), test.labels()) > 0.95);
}

TEST_CASE("MultinomialNB rejects negative features") {
  DataMatrix d = make_matrix({{1, -0.5}, {2, 1}}, {0, 1});
  CHECK_THROWS_WITH_AS(fit_classifier(d, MultinomialNBHyper{}), doctest::Contains("non-negative"), DataError);
}

TEST_CASE("MultinomialNB alpha=1 matches a hand computation") {
  // class 0 feature sums (3, 1), class 1 feature sums (1, 5)
  DataMatrix d = make_matrix({{2, 1}, {1, 0}, {0, 3}, {1, 2}, {0, 0}}, {0, 0, 1, 1, 1});
  MultinomialNBHyper h;  // alpha 1, fit_prior true
  auto model = fit_classifier(d, h);
  DataMatrix q = make_matrix({{1, 1}}, {0});
  double l0 = std::log(2.0 / 5) + std::log(4.0 / 6) + std::log(2.0 / 6);
  double l1 = std::log(3.0 / 5) + std::log(2.0 / 8) + std::log(6.0 / 8);
  double p0 = 1.0 / (1.0 + std::exp(l1 - l0));
  Eigen::MatrixXd proba = model.predict_proba(q);
  CHECK(proba(0, 0) == doctest::Approx(p0).epsilon(1e-12));
  h.fit_prior = false;
  l0 -= std::log(2.0 / 5) - std::log(0.5);
  l1 -= std::log(3.0 / 5) - std::log(0.5);
  CHECK(fit_classifier(d, h).predict_proba(q)(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(l1 - l0))).epsilon(1e-12));
}

TEST_CASE("a depth-1 tree separates 1-D data at zero") {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = -20; i <= 20; ++i) {
    if (i == 0) continue;
    rows.push_back({i * 0.1});
    labels.push_back(i > 0);
  }
  TreeHyper h;
  h.max_depth = 1;
  DataMatrix d = make_matrix(rows, labels);
  CHECK(train_accuracy(fit_classifier(d, h), d) == 1.0);
}

TEST_CASE("a single-tree forest without subsampling or bootstrap is a decision tree") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    DataMatrix train = testing::blobs(80, 4, 0.7, rng(), 3), test = testing::blobs(40, 4, 0.7, rng(), 3);
    TreeHyper tree;
    tree.criterion = trial % 2 ? SplitCriterion::Entropy : SplitCriterion::Gini;
    tree.max_depth = 1 + trial % 5;
    tree.min_samples_split = 2 + trial;
    ForestHyper forest{1, tree, false};
    std::uint64_t seed = rng();
    REQUIRE(fit_classifier(train, forest, seed).predict(test) == fit_classifier(train, tree, seed).predict(test));
  }
}

TEST_CASE("logistic regression learns a linear boundary") {
  DataMatrix train = testing::blobs(300, 2, 3.0, 4), test = testing::blobs(300, 2, 3.0, 5);
  CHECK(accuracy(fit_classifier(train, LogisticHyper{}).predict(test), test.labels()) > 0.9);
  // three classes, one-vs-rest
  DataMatrix tri = testing::blobs(300, 2, 4.0, 6, 3), tri_test = testing::blobs(300, 2, 4.0, 7, 3);
  CHECK(accuracy(fit_classifier(tri, LogisticHyper{}).predict(tri_test), tri_test.labels()) > 0.8);
}

TEST_CASE("property: gradient boosting training loss never increases") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    BoostingHyper h;
    h.n_estimators = 50;
    h.learning_rate = seed % 2 ? 0.5 : 0.1;
    h.max_depth = 1 + static_cast<int>(seed % 5);
    auto model = fit_classifier(testing::blobs(120, 3, 0.8, seed, 2 + seed % 2), h, seed);
    auto loss = model.training_loss();
    REQUIRE(loss.size() == 51);
    for (std::size_t i = 1; i < loss.size(); ++i) REQUIRE(loss[i] <= loss[i - 1]);
  }
}

TEST_CASE("property: probabilities are distributions, predictions are deterministic") {
  Rng rng(99);
  for (int trial = 0; trial < 8; ++trial) {
    DataMatrix train = shift_positive(testing::blobs(60, 3, 1.5, rng(), 2 + trial % 2), 10.0);
    DataMatrix test = shift_positive(testing::blobs(30, 3, 1.5, rng(), 2 + trial % 2), 10.0);
    std::uint64_t seed = rng();
    for (const auto& h : every_kind()) {
      CAPTURE(classifier_name(kind_of(h)));
      auto a = fit_classifier(train, h, seed), b = fit_classifier(train, h, seed);
      Eigen::MatrixXd pa = a.predict_proba(test), pb = b.predict_proba(test);
      REQUIRE(pa.rows() == 30);
      REQUIRE(pa.cwiseEqual(pb).all());
      REQUIRE(a.predict(test) == b.predict(test));
      REQUIRE(pa.minCoeff() >= 0.0);
      for (Eigen::Index r = 0; r < pa.rows(); ++r) REQUIRE(std::abs(pa.row(r).sum() - 1.0) < 1e-9);
      REQUIRE(a.predict(make_matrix({{10, 10, 10}}, {0})).size() == 1);
    }
  }
}

TEST_CASE("single-class training, gaps and column mismatch are errors") {
  DataMatrix one = make_matrix({{1, 2}, {2, 3}}, {0, 0});
  DataMatrix ok = shift_positive(testing::blobs(20, 2, 1.0, 1), 5.0);
  for (const auto& h : every_kind()) {
    CAPTURE(classifier_name(kind_of(h)));
    CHECK_THROWS_AS(fit_classifier(one, h), DataError);
    CHECK_THROWS_AS(fit_classifier(make_matrix({{1, kMissing}, {2, 3}}, {0, 1}), h), DataError);
    CHECK_THROWS_AS(fit_classifier(ok, h).predict(make_matrix({{1}}, {0})), DataError);
  }
}

TEST_CASE("names round-trip and accept the long KNN name") {
  for (const auto& h : every_kind()) CHECK(classifier_from_name(classifier_name(kind_of(h))) == kind_of(h));
  CHECK(classifier_from_name("KNeighborsClassifier") == ClassifierKind::KNN);
  CHECK_FALSE(classifier_from_name("XGBClassifier").has_value());
}
