#include "evoimpute/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "evoimpute/catalog.hpp"
#include "evoimpute/classifiers.hpp"
#include "evoimpute/csv.hpp"
#include "evoimpute/imputers.hpp"

namespace evoimpute {

double holdout_score(const Individual& ind, const DataMatrix& train, const DataMatrix& test, std::uint64_t seed) {
  FittedPipeline fitted = fit_pipeline(ind.tree, train, seed);
  std::vector<int> pred = fitted.predict(test);
  return accuracy(pred, test.labels());
}

double majority_baseline(const DataMatrix& train, const DataMatrix& test) {
  auto counts = train.class_counts();
  int majority = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  std::size_t hits = 0;
  for (int l : test.labels()) hits += l == majority;
  return static_cast<double>(hits) / static_cast<double>(test.n_rows());
}

RankTest dunn_test(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 5 || y.size() < 5) throw DataError("rank test needs at least 5 values per sample");
  std::size_t n1 = x.size(), n2 = y.size(), n = n1 + n2;
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(n);
  for (double v : x) pooled.emplace_back(v, 0);
  for (double v : y) pooled.emplace_back(v, 1);
  std::sort(pooled.begin(), pooled.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  double rank_sum[2] = {0.0, 0.0};
  double ties = 0.0;  // sum of t^3 - t over tie groups
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) rank_sum[pooled[k].second] += mid;
    double t = static_cast<double>(j - i);
    ties += t * t * t - t;
    i = j;
  }
  double N = static_cast<double>(n);
  double variance = N * (N + 1.0) / 12.0 - ties / (12.0 * (N - 1.0));
  double se = std::sqrt(std::max(variance, 0.0) * (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2)));
  RankTest out;
  if (!(se > 0.0)) return out;
  out.z = (rank_sum[0] / static_cast<double>(n1) - rank_sum[1] / static_cast<double>(n2)) / se;
  out.p_value = std::min(1.0, std::erfc(std::abs(out.z) / std::sqrt(2.0)));
  return out;
}

double pairwise_rank_test(std::span<const double> x, std::span<const double> y) { return dunn_test(x, y).p_value; }

FrequencyTables frequency_tables(std::span<const ExperimentRecord> records) {
  FrequencyTables t;
  for (auto k : {ImputerKind::Mean, ImputerKind::Median, ImputerKind::MostFrequent, ImputerKind::Max, ImputerKind::MICE,
                 ImputerKind::EM}) {
    t.imputers.emplace_back(imputer_name(k));
  }
  for (auto k : {ClassifierKind::KNN, ClassifierKind::GaussianNB, ClassifierKind::MultinomialNB,
                 ClassifierKind::DecisionTree, ClassifierKind::RandomForest, ClassifierKind::LogisticRegression,
                 ClassifierKind::GradientBoosting}) {
    t.classifiers.emplace_back(classifier_name(k));
  }
  std::set<std::string> datasets;
  for (const auto& r : records) datasets.insert(r.dataset_id);
  t.datasets.assign(datasets.begin(), datasets.end());

  auto index_in = [](const std::vector<std::string>& names, const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names.begin());
  };
  t.imputer_counts.assign(t.datasets.size(), std::vector<std::size_t>(t.imputers.size(), 0));
  t.pair_counts.assign(t.imputers.size(), std::vector<std::size_t>(t.classifiers.size(), 0));
  t.pair_coverage = t.pair_counts;
  std::set<std::tuple<std::size_t, std::size_t, std::string>> seen;
  for (const auto& r : records) {
    if (!r.ok || !r.imputer_name) continue;
    auto i = index_in(t.imputers, *r.imputer_name);
    auto d = index_in(t.datasets, r.dataset_id);
    if (!i) continue;
    ++t.imputer_counts[*d][*i];
    auto c = index_in(t.classifiers, r.classifier_name);
    if (!c) continue;
    ++t.pair_counts[*i][*c];
    if (seen.emplace(*i, *c, r.dataset_id).second) ++t.pair_coverage[*i][*c];
  }
  return t;
}

std::vector<SignificanceRow> significance_table(std::span<const ExperimentRecord> records) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_dataset;
  for (const auto& r : records) {
    auto& entry = by_dataset[r.dataset_id];
    if (!r.ok) continue;
    (r.arm == "complete" ? entry.second : entry.first).push_back(r.holdout_accuracy);
  }
  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  std::vector<SignificanceRow> rows;
  for (const auto& [id, arms] : by_dataset) {
    SignificanceRow row;
    row.dataset_id = id;
    row.n_missing = arms.first.size();
    row.n_complete = arms.second.size();
    row.mean_missing = mean(arms.first);
    row.mean_complete = mean(arms.second);
    if (row.n_missing >= 5 && row.n_complete >= 5) {
      RankTest test = dunn_test(arms.first, arms.second);
      row.z = test.z;
      row.p_value = test.p_value;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

double parse_real(const std::string& s, const char* what) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw DataError(std::string("bad ") + what + " '" + s + "'");
  return v;
}

template <typename T>
T parse_uint(const std::string& s, const char* what) {
  T v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw DataError(std::string("bad ") + what + " '" + s + "'");
  return v;
}

std::optional<double> parse_optional(const std::string& s, const char* what) {
  if (s == "NA") return std::nullopt;
  return parse_real(s, what);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_real(*v) : "NA"; }

const std::vector<std::string>& record_header() {
  static const std::vector<std::string> h = {
      "dataset_id",     "repetition",       "arm",           "run_seed",        "missing_rate",
      "best_pipeline",  "cv_accuracy",      "holdout_accuracy", "majority_baseline", "imputer_name",
      "classifier_name", "pipeline_size",   "generations_run", "status",          "error"};
  return h;
}

std::vector<std::string> expect_header(std::istream& in, const char* file) {
  std::string line;
  if (!csv::next_line(in, line)) throw DataError(std::string(file) + ": empty file");
  return csv::split_line(line);
}

}  // namespace

void write_records(std::ostream& out, std::span<const ExperimentRecord> records) {
  out << csv::join(record_header()) << '\n';
  for (const auto& r : records) {
    out << csv::join({r.dataset_id, std::to_string(r.repetition), r.arm, std::to_string(r.run_seed),
                      format_real(r.missing_rate), r.best_pipeline, format_real(r.cv_accuracy),
                      format_real(r.holdout_accuracy), format_real(r.majority_baseline), r.imputer_name.value_or(""),
                      r.classifier_name, std::to_string(r.pipeline_size), std::to_string(r.generations_run),
                      r.ok ? "ok" : "failed", one_line(r.error)})
        << '\n';
  }
}

std::vector<ExperimentRecord> read_records(std::istream& in) {
  if (expect_header(in, "records.csv") != record_header()) throw DataError("records.csv: unexpected header");
  std::vector<ExperimentRecord> out;
  std::string line;
  for (std::size_t row = 0; csv::next_line(in, line); ++row) {
    if (line.empty()) continue;
    auto f = csv::split_line(line);
    if (f.size() != record_header().size()) {
      throw DataError("records.csv: row " + std::to_string(row) + " has " + std::to_string(f.size()) + " fields");
    }
    ExperimentRecord r;
    r.dataset_id = f[0];
    r.repetition = parse_uint<std::size_t>(f[1], "repetition");
    r.arm = f[2];
    r.run_seed = parse_uint<std::uint64_t>(f[3], "run_seed");
    r.missing_rate = parse_real(f[4], "missing_rate");
    r.best_pipeline = f[5];
    r.cv_accuracy = parse_real(f[6], "cv_accuracy");
    r.holdout_accuracy = parse_real(f[7], "holdout_accuracy");
    r.majority_baseline = parse_real(f[8], "majority_baseline");
    if (!f[9].empty()) r.imputer_name = f[9];
    r.classifier_name = f[10];
    r.pipeline_size = parse_uint<std::size_t>(f[11], "pipeline_size");
    r.generations_run = parse_uint<std::size_t>(f[12], "generations_run");
    if (f[13] != "ok" && f[13] != "failed") throw DataError("records.csv: bad status '" + f[13] + "'");
    r.ok = f[13] == "ok";
    r.error = f[14];
    out.push_back(std::move(r));
  }
  return out;
}

void write_imputer_freq(std::ostream& out, const FrequencyTables& t) {
  std::vector<std::string> header = {"dataset"};
  header.insert(header.end(), t.imputers.begin(), t.imputers.end());
  out << csv::join(header) << '\n';
  for (std::size_t d = 0; d < t.datasets.size(); ++d) {
    std::vector<std::string> row = {t.datasets[d]};
    for (std::size_t n : t.imputer_counts[d]) row.push_back(std::to_string(n));
    out << csv::join(row) << '\n';
  }
}

void write_pair_freq(std::ostream& out, const FrequencyTables& t) {
  out << "imputer,classifier,runs,datasets\n";
  for (std::size_t i = 0; i < t.imputers.size(); ++i) {
    for (std::size_t c = 0; c < t.classifiers.size(); ++c) {
      out << csv::join({t.imputers[i], t.classifiers[c], std::to_string(t.pair_counts[i][c]),
                        std::to_string(t.pair_coverage[i][c])})
          << '\n';
    }
  }
}

FrequencyTables read_frequency_tables(std::istream& imputer_freq, std::istream& pair_freq) {
  FrequencyTables t;
  auto header = expect_header(imputer_freq, "imputer_freq.csv");
  if (header.empty() || header[0] != "dataset") throw DataError("imputer_freq.csv: unexpected header");
  t.imputers.assign(header.begin() + 1, header.end());
  std::string line;
  while (csv::next_line(imputer_freq, line)) {
    if (line.empty()) continue;
    auto f = csv::split_line(line);
    if (f.size() != header.size()) throw DataError("imputer_freq.csv: ragged row");
    t.datasets.push_back(f[0]);
    std::vector<std::size_t> counts;
    for (std::size_t k = 1; k < f.size(); ++k) counts.push_back(parse_uint<std::size_t>(f[k], "count"));
    t.imputer_counts.push_back(std::move(counts));
  }

  if (expect_header(pair_freq, "pair_freq.csv") != std::vector<std::string>{"imputer", "classifier", "runs", "datasets"}) {
    throw DataError("pair_freq.csv: unexpected header");
  }
  std::vector<std::array<std::string, 4>> rows;
  while (csv::next_line(pair_freq, line)) {
    if (line.empty()) continue;
    auto f = csv::split_line(line);
    if (f.size() != 4) throw DataError("pair_freq.csv: ragged row");
    rows.push_back({f[0], f[1], f[2], f[3]});
    if (std::find(t.classifiers.begin(), t.classifiers.end(), f[1]) == t.classifiers.end()) t.classifiers.push_back(f[1]);
  }
  t.pair_counts.assign(t.imputers.size(), std::vector<std::size_t>(t.classifiers.size(), 0));
  t.pair_coverage = t.pair_counts;
  for (const auto& r : rows) {
    auto i = std::find(t.imputers.begin(), t.imputers.end(), r[0]);
    if (i == t.imputers.end()) throw DataError("pair_freq.csv: unknown imputer '" + r[0] + "'");
    auto c = std::find(t.classifiers.begin(), t.classifiers.end(), r[1]);
    std::size_t ii = static_cast<std::size_t>(i - t.imputers.begin());
    std::size_t cc = static_cast<std::size_t>(c - t.classifiers.begin());
    t.pair_counts[ii][cc] = parse_uint<std::size_t>(r[2], "runs");
    t.pair_coverage[ii][cc] = parse_uint<std::size_t>(r[3], "datasets");
  }
  return t;
}

void write_significance(std::ostream& out, std::span<const SignificanceRow> rows) {
  out << "dataset,n_missing,n_complete,mean_missing,mean_complete,z,p_value,significant\n";
  for (const auto& r : rows) {
    out << csv::join({r.dataset_id, std::to_string(r.n_missing), std::to_string(r.n_complete),
                      format_real(r.mean_missing), format_real(r.mean_complete), format_optional(r.z),
                      format_optional(r.p_value), r.p_value ? (r.significant() ? "yes" : "no") : "NA"})
        << '\n';
  }
}

std::vector<SignificanceRow> read_significance(std::istream& in) {
  auto header = expect_header(in, "significance.csv");
  if (header.size() != 8 || header[0] != "dataset") throw DataError("significance.csv: unexpected header");
  std::vector<SignificanceRow> out;
  std::string line;
  while (csv::next_line(in, line)) {
    if (line.empty()) continue;
    auto f = csv::split_line(line);
    if (f.size() != 8) throw DataError("significance.csv: ragged row");
    SignificanceRow r;
    r.dataset_id = f[0];
    r.n_missing = parse_uint<std::size_t>(f[1], "n_missing");
    r.n_complete = parse_uint<std::size_t>(f[2], "n_complete");
    r.mean_missing = parse_real(f[3], "mean_missing");
    r.mean_complete = parse_real(f[4], "mean_complete");
    r.z = parse_optional(f[5], "z");
    r.p_value = parse_optional(f[6], "p_value");
    out.push_back(std::move(r));
  }
  return out;
}

void write_summary(std::ostream& out, std::span<const ExperimentRecord> records, const FrequencyTables& t,
                   std::span<const SignificanceRow> sig) {
  std::size_t failed = 0;
  for (const auto& r : records) failed += !r.ok;
  out << "runs: " << records.size() << " (" << failed << " failed)\n";
  for (const auto& r : records) {
    if (!r.ok) out << "  failed: " << r.dataset_id << " rep " << r.repetition << " " << r.arm << ": " << one_line(r.error) << '\n';
  }
  out << "\nholdout accuracy by dataset (missing arm vs complete arm)\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& s : sig) {
    auto mean = [](double m, std::size_t n) {
      std::ostringstream txt;
      txt << std::fixed << std::setprecision(4);
      if (n) txt << m; else txt << "NA";
      return txt.str();
    };
    out << "  " << s.dataset_id << ": " << mean(s.mean_missing, s.n_missing) << " (n=" << s.n_missing << ") vs "
        << mean(s.mean_complete, s.n_complete) << " (n=" << s.n_complete << ")";
    if (s.p_value) out << ", p=" << *s.p_value << (s.significant() ? " significant" : "");
    out << '\n';
  }
  out << "\nimputer frequency in best pipelines\n";
  for (std::size_t i = 0; i < t.imputers.size(); ++i) {
    std::size_t total = 0;
    for (const auto& row : t.imputer_counts) total += row[i];
    out << "  " << t.imputers[i] << ": " << total << '\n';
  }
  out << "\nimputer/classifier pairs (runs, datasets)\n";
  for (std::size_t i = 0; i < t.imputers.size(); ++i) {
    for (std::size_t c = 0; c < t.classifiers.size(); ++c) {
      if (t.pair_counts[i][c] == 0) continue;
      out << "  " << t.imputers[i] << " + " << t.classifiers[c] << ": " << t.pair_counts[i][c] << ", "
          << t.pair_coverage[i][c] << '\n';
    }
  }
}

void sort_records(std::vector<ExperimentRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const ExperimentRecord& a, const ExperimentRecord& b) {
    return std::tie(a.dataset_id, a.repetition, a.arm) < std::tie(b.dataset_id, b.repetition, b.arm);
  });
}

}  // namespace evoimpute
