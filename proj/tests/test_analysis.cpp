#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "evoimpute/analysis.hpp"
#include "evoimpute/classifiers.hpp"
#include "support.hpp"

using namespace evoimpute;

namespace {

ExperimentRecord rec(std::string dataset, std::size_t rep, std::string arm, std::optional<std::string> imputer,
                     std::string classifier, double holdout = 0.8) {
  ExperimentRecord r;
  r.dataset_id = std::move(dataset);
  r.repetition = rep;
  r.arm = std::move(arm);
  r.run_seed = 1000 + rep;
  r.missing_rate = imputer ? 0.07 : 0.0;
  r.best_pipeline = "[" + classifier + ", input_matrix]";
  r.cv_accuracy = holdout - 0.01;
  r.holdout_accuracy = holdout;
  r.majority_baseline = 0.5;
  r.imputer_name = std::move(imputer);
  r.classifier_name = std::move(classifier);
  r.pipeline_size = r.imputer_name ? 2 : 1;
  r.generations_run = 10;
  return r;
}

std::size_t index_of(const std::vector<std::string>& v, const std::string& s) {
  return static_cast<std::size_t>(std::find(v.begin(), v.end(), s) - v.begin());
}

// Tie-corrected two-sample rank z, spelled out.
double oracle_p(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> all(x);
  all.insert(all.end(), y.begin(), y.end());
  const double n = static_cast<double>(all.size());
  auto midrank = [&](double v) {
    double below = 0, equal = 0;
    for (double a : all) {
      below += a < v;
      equal += a == v;
    }
    return below + (equal + 1) / 2;
  };
  double rx = 0, ry = 0;
  for (double v : x) rx += midrank(v);
  for (double v : y) ry += midrank(v);
  std::map<double, double> groups;
  for (double a : all) ++groups[a];
  double ties = 0;
  for (const auto& [v, t] : groups) ties += t * t * t - t;
  double var = (n * (n + 1) / 12 - ties / (12 * (n - 1))) * (1.0 / x.size() + 1.0 / y.size());
  if (var <= 0) return 1.0;
  double z = (rx / x.size() - ry / y.size()) / std::sqrt(var);
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

}  // namespace

TEST_CASE("accuracy and majority baseline") {
  std::vector<int> pred{0, 1, 0}, truth{0, 0, 0};
  CHECK(accuracy(pred, truth) == doctest::Approx(2.0 / 3));
  CHECK(accuracy(truth, truth) == 1.0);
  DataMatrix train = testing::make_matrix({{1}, {2}, {3}}, {1, 1, 0});
  DataMatrix test = testing::make_matrix({{1}, {2}, {3}, {4}, {5}}, {1, 1, 1, 0, 0});
  CHECK(majority_baseline(train, test) == doctest::Approx(0.6));
}

TEST_CASE("holdout score refits on the whole training split") {
  DataMatrix train = testing::blobs(200, 2, 5.0, 1), test = testing::blobs(100, 2, 5.0, 2);
  Individual ind;
  ind.tree = parse_pipeline("[GaussianNB, [StandardScaler, input_matrix]]", default_grammar(false));
  ind.valid = true;
  CHECK(holdout_score(ind, train, test, 0) > 0.95);
  ind.tree = parse_pipeline("[MultinomialNB, input_matrix, 1, true]", default_grammar(false));
  CHECK_THROWS(holdout_score(ind, train, test, 0));
}

TEST_CASE("rank test: identical samples give p = 1") {
  std::vector<double> x{0.8, 0.81, 0.79, 0.85, 0.9};
  CHECK(pairwise_rank_test(x, x) == doctest::Approx(1.0));
  std::vector<double> flat(10, 0.5);
  CHECK(pairwise_rank_test(flat, flat) == 1.0);
}

TEST_CASE("rank test: separated samples match the hand-computed statistic") {
  std::vector<double> x(20, 0.9), y(20, 0.5);
  // midranks 30.5 vs 10.5, two tie groups of 20 among 40
  double var = (40.0 * 41 / 12 - 2 * (8000.0 - 20) / (12 * 39)) * (2.0 / 20);
  double z = 20.0 / std::sqrt(var);
  RankTest t = dunn_test(x, y);
  CHECK(t.z == doctest::Approx(z).epsilon(1e-12));
  CHECK(t.p_value == doctest::Approx(std::erfc(z / std::sqrt(2.0))).epsilon(1e-9));
  CHECK(t.p_value < 0.001);
}

TEST_CASE("property: rank test matches the oracle and is symmetric") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x, y;
    std::size_t nx = 5 + uniform_index(rng, 20), ny = 5 + uniform_index(rng, 20);
    for (std::size_t i = 0; i < nx; ++i) x.push_back(std::round(uniform01(rng) * 10) / 10);
    for (std::size_t i = 0; i < ny; ++i) y.push_back(std::round((uniform01(rng) + 0.1) * 10) / 10);
    double p = pairwise_rank_test(x, y);
    REQUIRE(p == doctest::Approx(oracle_p(x, y)).epsilon(1e-9));
    REQUIRE(p == doctest::Approx(pairwise_rank_test(y, x)).epsilon(1e-12));
  }
}

TEST_CASE("rank test needs five per sample") {
  std::vector<double> four{1, 2, 3, 4}, five{1, 2, 3, 4, 5};
  CHECK_THROWS(pairwise_rank_test(four, five));
}

TEST_CASE("property: rank test rejects about 5% under the null") {
  Rng rng(2024);
  std::normal_distribution<double> g(0.8, 0.05);
  int rejects = 0;
  for (int sim = 0; sim < 1000; ++sim) {
    std::vector<double> x(20), y(20);
    for (double& v : x) v = g(rng);
    for (double& v : y) v = g(rng);
    rejects += pairwise_rank_test(x, y) < kSignificance;
  }
  CHECK(rejects >= 30);
  CHECK(rejects <= 70);
}

TEST_CASE("frequency tables count runs, pairs and dataset coverage") {
  std::vector<ExperimentRecord> r;
  for (std::size_t i = 0; i < 20; ++i) r.push_back(rec("d1", i, "missing", "MFImputer", "KNN"));
  for (std::size_t i = 0; i < 3; ++i) r.push_back(rec("d2", i, "missing", "MICEImputer", "GaussianNB"));
  r.push_back(rec("d2", 3, "missing", "MFImputer", "KNN"));
  r.push_back(rec("d2", 0, "complete", std::nullopt, "KNN"));
  ExperimentRecord failed = rec("d2", 4, "missing", "EMImputer", "KNN");
  failed.ok = false;
  r.push_back(failed);

  FrequencyTables t = frequency_tables(r);
  CHECK(t.datasets == std::vector<std::string>{"d1", "d2"});
  std::size_t mf = index_of(t.imputers, "MFImputer"), mice = index_of(t.imputers, "MICEImputer"),
              em = index_of(t.imputers, "EMImputer");
  std::size_t knn = index_of(t.classifiers, "KNN"), nb = index_of(t.classifiers, "GaussianNB");
  CHECK(t.imputer_counts[0][mf] == 20);
  for (std::size_t i = 0; i < t.imputers.size(); ++i) {
    if (i != mf) CHECK(t.imputer_counts[0][i] == 0);
  }
  CHECK(t.pair_counts[mice][nb] == 3);
  CHECK(t.pair_coverage[mice][nb] == 1);
  CHECK(t.pair_counts[mf][knn] == 21);
  CHECK(t.pair_coverage[mf][knn] == 2);
  CHECK(t.imputer_counts[1][em] == 0);

  // per dataset, imputer counts add up to the successful missing-arm runs
  for (std::size_t d = 0; d < t.datasets.size(); ++d) {
    std::size_t total = 0, runs = 0;
    for (std::size_t c : t.imputer_counts[d]) total += c;
    for (const auto& x : r) runs += x.dataset_id == t.datasets[d] && x.ok && x.imputer_name;
    CHECK(total == runs);
  }
  for (std::size_t i = 0; i < t.imputers.size(); ++i) {
    for (std::size_t c = 0; c < t.classifiers.size(); ++c) {
      CHECK(t.pair_coverage[i][c] <= std::min(t.datasets.size(), t.pair_counts[i][c]));
    }
  }
}

TEST_CASE("significance table: one row per dataset, NA below five runs") {
  std::vector<ExperimentRecord> r;
  for (std::size_t i = 0; i < 6; ++i) {
    r.push_back(rec("a", i, "missing", "MeanImputer", "KNN", 0.6 + 0.001 * i));
    r.push_back(rec("a", i, "complete", std::nullopt, "KNN", 0.9 + 0.001 * i));
    r.push_back(rec("b", i, "missing", "MeanImputer", "KNN", 0.7));
  }
  auto rows = significance_table(r);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].dataset_id == "a");
  CHECK(rows[0].n_missing == 6);
  CHECK(rows[0].mean_complete == doctest::Approx(0.9025));
  REQUIRE(rows[0].p_value);
  CHECK(rows[0].significant());
  CHECK_FALSE(rows[1].p_value);
  CHECK_FALSE(rows[1].significant());
}

TEST_CASE("writers and readers round-trip") {
  std::vector<ExperimentRecord> r;
  for (std::size_t i = 0; i < 6; ++i) {
    r.push_back(rec("alpha", i, "missing", "EMImputer", "RandomForest", 0.75 + 0.01 * i));
    r.push_back(rec("alpha", i, "complete", std::nullopt, "KNN", 0.8));
  }
  r[1].best_pipeline = "[KNN, [PCA, input_matrix, 2], 45, 1, distance]";  // commas must survive quoting
  r[2].ok = false;
  r[2].error = "MultinomialNB requires non-negative features, \"quoted\"";
  r[3].holdout_accuracy = 1.0 / 3;
  std::stringstream rs;
  write_records(rs, r);
  auto back = read_records(rs);
  REQUIRE(back.size() == r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i].wall_time = 0.0;
    CHECK(back[i] == r[i]);
  }

  FrequencyTables t = frequency_tables(r);
  std::stringstream fi, fp;
  write_imputer_freq(fi, t);
  write_pair_freq(fp, t);
  FrequencyTables tb = read_frequency_tables(fi, fp);
  CHECK(tb.datasets == t.datasets);
  CHECK(tb.imputer_counts == t.imputer_counts);
  CHECK(tb.pair_counts == t.pair_counts);
  CHECK(tb.pair_coverage == t.pair_coverage);

  auto sig = significance_table(r);
  std::stringstream ss;
  write_significance(ss, sig);
  auto sb = read_significance(ss);
  REQUIRE(sb.size() == sig.size());
  for (std::size_t i = 0; i < sig.size(); ++i) {
    CHECK(sb[i].dataset_id == sig[i].dataset_id);
    CHECK(sb[i].n_missing == sig[i].n_missing);
    CHECK(sb[i].p_value.has_value() == sig[i].p_value.has_value());
    if (sig[i].p_value) CHECK(*sb[i].p_value == doctest::Approx(*sig[i].p_value).epsilon(1e-12));
  }

  std::ostringstream summary;
  write_summary(summary, r, t, sig);
  CHECK(summary.str().find("alpha") != std::string::npos);
}

TEST_CASE("records sort by dataset, repetition, arm") {
  std::vector<ExperimentRecord> r{rec("b", 0, "missing", "MeanImputer", "KNN"), rec("a", 1, "missing", "MeanImputer", "KNN"),
                                  rec("a", 0, "missing", "MeanImputer", "KNN"), rec("a", 0, "complete", std::nullopt, "KNN")};
  sort_records(r);
  CHECK(r[0].dataset_id == "a");
  CHECK(r[0].arm == "complete");
  CHECK(r[1].arm == "missing");
  CHECK(r[2].repetition == 1);
  CHECK(r[3].dataset_id == "b");
}
