#include "evoimpute/data_matrix.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "evoimpute/csv.hpp"
#include "evoimpute/random.hpp"

namespace evoimpute {

DataMatrix::DataMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<double> values, std::vector<int> labels,
                       std::vector<std::string> col_names, std::vector<std::string> class_names)
    : n_rows_(n_rows),
      n_cols_(n_cols),
      values_(std::move(values)),
      labels_(std::move(labels)),
      col_names_(std::move(col_names)),
      class_names_(std::move(class_names)),
      row_ids_(n_rows),
      completeness_(Completeness::Complete) {
  if (n_rows_ == 0 || n_cols_ == 0) throw DataError("data matrix needs at least one row and one column");
  if (values_.size() != n_rows_ * n_cols_) throw DataError("value grid size does not match shape");
  if (labels_.size() != n_rows_) throw DataError("label count does not match row count");
  if (col_names_.empty()) {
    for (std::size_t c = 0; c < n_cols_; ++c) col_names_.push_back("x" + std::to_string(c));
  }
  if (col_names_.size() != n_cols_) throw DataError("column name count does not match column count");
  for (int y : labels_) {
    if (y < 0 || static_cast<std::size_t>(y) >= class_names_.size()) throw DataError("label id out of range");
  }
  std::iota(row_ids_.begin(), row_ids_.end(), std::size_t{0});
  if (std::any_of(values_.begin(), values_.end(), [](double v) { return std::isinf(v); })) {
    throw DataError("data matrix contains infinite values");
  }
  if (std::any_of(values_.begin(), values_.end(), [](double v) { return is_missing(v); })) {
    completeness_ = Completeness::MayContainMissing;
  }
}

std::optional<double> DataMatrix::at(std::size_t r, std::size_t c) const {
  double v = value(r, c);
  if (is_missing(v)) return std::nullopt;
  return v;
}

std::vector<double> DataMatrix::column(std::size_t c) const {
  std::vector<double> out(n_rows_);
  for (std::size_t r = 0; r < n_rows_; ++r) out[r] = value(r, c);
  return out;
}

std::size_t DataMatrix::missing_count() const {
  return static_cast<std::size_t>(std::count_if(values_.begin(), values_.end(), [](double v) { return is_missing(v); }));
}

DataMatrix DataMatrix::subset(std::span<const std::size_t> rows) const {
  std::vector<double> values;
  values.reserve(rows.size() * n_cols_);
  std::vector<int> labels;
  labels.reserve(rows.size());
  std::vector<std::size_t> ids;
  ids.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= n_rows_) throw DataError("row index out of range");
    auto src = row(r);
    values.insert(values.end(), src.begin(), src.end());
    labels.push_back(labels_[r]);
    ids.push_back(row_ids_[r]);
  }
  DataMatrix out(rows.size(), n_cols_, std::move(values), std::move(labels), col_names_, class_names_);
  out.label_name_ = label_name_;
  out.row_ids_ = std::move(ids);
  return out;
}

DataMatrix DataMatrix::with_features(std::size_t n_cols, std::vector<double> values,
                                     std::vector<std::string> col_names) const {
  DataMatrix out(n_rows_, n_cols, std::move(values), labels_, std::move(col_names), class_names_);
  out.row_ids_ = row_ids_;
  out.label_name_ = label_name_;
  return out;
}

DataMatrix DataMatrix::with_label_name(std::string name) const {
  DataMatrix out = *this;
  out.label_name_ = std::move(name);
  return out;
}

std::vector<std::size_t> DataMatrix::class_counts() const {
  std::vector<std::size_t> counts(n_classes(), 0);
  for (int y : labels_) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

bool operator==(const DataMatrix& a, const DataMatrix& b) {
  if (a.n_rows_ != b.n_rows_ || a.n_cols_ != b.n_cols_ || a.labels_ != b.labels_ || a.col_names_ != b.col_names_ ||
      a.class_names_ != b.class_names_) {
    return false;
  }
  for (std::size_t i = 0; i < a.values_.size(); ++i) {
    double x = a.values_[i];
    double y = b.values_[i];
    if (is_missing(x) != is_missing(y)) return false;
    if (!is_missing(x) && x != y) return false;
  }
  return true;
}

std::set<std::string> default_missing_tokens() { return {"", "NaN", "NA", "?"}; }

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_real(std::string_view token) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

DataMatrix read_csv(std::istream& in, const std::set<std::string>& missing_tokens) {
  std::string line;
  if (!csv::next_line(in, line)) throw DataError("csv: missing header row");
  auto header = csv::split_line(line);
  if (header.size() < 2) throw DataError("csv: need at least one feature column and a label column");
  const std::size_t n_cols = header.size() - 1;
  std::vector<std::string> col_names(header.begin(), header.end() - 1);

  std::vector<double> values;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::unordered_map<std::string, int> class_ids;
  std::size_t row = 0;
  while (csv::next_line(in, line)) {
    if (trim(line).empty()) continue;
    auto fields = csv::split_line(line);
    if (fields.size() != header.size()) {
      throw DataError("csv: row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                      " fields, expected " + std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < n_cols; ++c) {
      std::string_view token = trim(fields[c]);
      if (missing_tokens.count(std::string(token))) {
        values.push_back(kMissing);
        continue;
      }
      auto v = parse_real(token);
      if (!v) {
        throw DataError("csv: row " + std::to_string(row) + " column '" + col_names[c] + "': non-numeric token '" +
                        std::string(token) + "'");
      }
      values.push_back(*v);
    }
    std::string label(trim(fields.back()));
    if (label.empty() || missing_tokens.count(label)) {
      throw DataError("csv: row " + std::to_string(row) + " has a missing label");
    }
    auto [it, inserted] = class_ids.try_emplace(label, static_cast<int>(class_names.size()));
    if (inserted) class_names.push_back(label);
    labels.push_back(it->second);
    ++row;
  }
  if (row < 2) throw DataError("csv: need at least two data rows");
  return DataMatrix(row, n_cols, std::move(values), std::move(labels), std::move(col_names), std::move(class_names))
      .with_label_name(std::string(trim(header.back())));
}

DataMatrix load_csv(const std::string& path, const std::set<std::string>& missing_tokens) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in, missing_tokens);
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const DataMatrix& data) {
  std::vector<std::string> header = data.col_names();
  header.push_back(data.label_name());
  out << csv::join(header) << '\n';
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    for (std::size_t c = 0; c < data.n_cols(); ++c) {
      double v = data.value(r, c);
      out << (is_missing(v) ? std::string("NaN") : format_real(v)) << ',';
    }
    out << csv::quote(data.class_names()[static_cast<std::size_t>(data.label(r))]) << '\n';
  }
}

void write_csv(const std::string& path, const DataMatrix& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(out, data);
}

namespace {

void check_fraction(double f) {
  if (!(f > 0.0 && f < 1.0)) throw DataError("train fraction must lie in (0, 1)");
}

SplitPair make_split(const DataMatrix& data, std::vector<std::size_t> train_rows, double fraction,
                     std::uint64_t seed) {
  std::vector<char> in_train(data.n_rows(), 0);
  for (std::size_t r : train_rows) in_train[r] = 1;
  std::vector<std::size_t> test_rows;
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    if (!in_train[r]) test_rows.push_back(r);
  }
  std::sort(train_rows.begin(), train_rows.end());
  if (train_rows.empty() || test_rows.empty()) throw DataError("split leaves an empty partition");
  return SplitPair{data.subset(train_rows), data.subset(test_rows), fraction, seed};
}

}  // namespace

SplitPair stratified_split(const DataMatrix& data, double train_fraction, std::uint64_t seed) {
  check_fraction(train_fraction);
  const std::size_t k = data.n_classes();
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t r = 0; r < data.n_rows(); ++r) members[static_cast<std::size_t>(data.label(r))].push_back(r);
  for (std::size_t c = 0; c < k; ++c) {
    if (members[c].size() == 1) {
      throw DataError("class '" + data.class_names()[c] + "' has a single member; cannot stratify");
    }
  }

  const auto total = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(data.n_rows())));
  std::vector<std::size_t> quota(k);
  std::vector<double> remainder(k);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    double exact = train_fraction * static_cast<double>(members[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - static_cast<double>(quota[c]);
    assigned += quota[c];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < total && i < k; ++i) {
    std::size_t c = order[i];
    if (quota[c] < members[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }

  Rng rng(seed);
  std::vector<std::size_t> train_rows;
  for (std::size_t c = 0; c < k; ++c) {
    std::shuffle(members[c].begin(), members[c].end(), rng);
    train_rows.insert(train_rows.end(), members[c].begin(), members[c].begin() + static_cast<long>(quota[c]));
  }
  return make_split(data, std::move(train_rows), train_fraction, seed);
}

SplitPair random_split(const DataMatrix& data, double train_fraction, std::uint64_t seed) {
  check_fraction(train_fraction);
  std::vector<std::size_t> rows(data.n_rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(rows.begin(), rows.end(), rng);
  const auto total = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(data.n_rows())));
  rows.resize(total);
  return make_split(data, std::move(rows), train_fraction, seed);
}

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t n_classes, std::size_t folds,
                                          std::uint64_t seed) {
  if (folds < 2) throw DataError("need at least two folds");
  std::vector<std::vector<std::size_t>> members(n_classes);
  for (std::size_t r = 0; r < labels.size(); ++r) members[static_cast<std::size_t>(labels[r])].push_back(r);
  Rng rng(seed);
  std::vector<std::size_t> fold(labels.size(), 0);
  std::size_t next = 0;
  for (auto& m : members) {
    std::shuffle(m.begin(), m.end(), rng);
    for (std::size_t r : m) {
      fold[r] = next;
      next = (next + 1) % folds;
    }
  }
  return fold;
}

ColumnStats column_stats(const DataMatrix& data, std::size_t col) {
  if (col >= data.n_cols()) throw DataError("column index out of range");
  std::vector<double> obs;
  obs.reserve(data.n_rows());
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    if (!data.missing(r, col)) obs.push_back(data.value(r, col));
  }
  if (obs.empty()) throw DataError("column '" + data.col_names()[col] + "' has no observed values");
  std::sort(obs.begin(), obs.end());
  const std::size_t n = obs.size();
  ColumnStats s{};
  s.observed_count = n;
  s.mean = std::accumulate(obs.begin(), obs.end(), 0.0) / static_cast<double>(n);
  s.median = n % 2 ? obs[n / 2] : 0.5 * (obs[n / 2 - 1] + obs[n / 2]);
  s.max = obs.back();
  // sorted ascending, so the first longest run is the smallest modal value
  std::size_t best = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && obs[j] == obs[i]) ++j;
    if (j - i > best) {
      best = j - i;
      s.mode = obs[i];
    }
    i = j;
  }
  return s;
}

}  // namespace evoimpute
