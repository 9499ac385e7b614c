#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace evoimpute {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Completeness { Complete, MayContainMissing };

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

/// Row-major table of optional reals plus one categorical label per row.
///
/// Absent cells are stored as quiet NaN; a NaN can therefore never be an
/// observed value. Instances are immutable after construction. Every row keeps
/// the index it had in the matrix it was ultimately loaded from (`row_ids`),
/// so subsets can be traced back to source rows.
class DataMatrix {
 public:
  DataMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<double> values, std::vector<int> labels,
             std::vector<std::string> col_names, std::vector<std::string> class_names);

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return n_cols_; }
  std::size_t n_classes() const { return class_names_.size(); }

  double value(std::size_t r, std::size_t c) const { return values_[r * n_cols_ + c]; }
  bool missing(std::size_t r, std::size_t c) const { return is_missing(value(r, c)); }
  std::optional<double> at(std::size_t r, std::size_t c) const;
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * n_cols_, n_cols_}; }
  std::span<const double> values() const { return values_; }
  std::vector<double> column(std::size_t c) const;

  int label(std::size_t r) const { return labels_[r]; }
  std::span<const int> labels() const { return labels_; }
  const std::vector<std::string>& col_names() const { return col_names_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  std::span<const std::size_t> row_ids() const { return row_ids_; }
  /// Header of the label column, echoed when the matrix is written back out.
  const std::string& label_name() const { return label_name_; }
  DataMatrix with_label_name(std::string name) const;

  Completeness completeness() const { return completeness_; }
  bool complete() const { return completeness_ == Completeness::Complete; }
  std::size_t missing_count() const;

  /// Rows in the given order; labels, names and provenance follow.
  DataMatrix subset(std::span<const std::size_t> rows) const;

  /// Same rows and labels over a new feature grid (n_rows × n_cols).
  DataMatrix with_features(std::size_t n_cols, std::vector<double> values, std::vector<std::string> col_names) const;

  /// Per-class row counts, indexed by class id.
  std::vector<std::size_t> class_counts() const;

  friend bool operator==(const DataMatrix& a, const DataMatrix& b);

 private:
  std::size_t n_rows_;
  std::size_t n_cols_;
  std::vector<double> values_;
  std::vector<int> labels_;
  std::vector<std::string> col_names_;
  std::vector<std::string> class_names_;
  std::vector<std::size_t> row_ids_;
  std::string label_name_ = "class";
  Completeness completeness_;
};

struct SplitPair {
  DataMatrix train;
  DataMatrix test;
  double train_fraction;
  std::uint64_t seed;
};

struct ColumnStats {
  double mean;
  double median;
  double mode;
  double max;
  std::size_t observed_count;
};

std::set<std::string> default_missing_tokens();

DataMatrix read_csv(std::istream& in, const std::set<std::string>& missing_tokens = default_missing_tokens());
DataMatrix load_csv(const std::string& path, const std::set<std::string>& missing_tokens = default_missing_tokens());

/// Writes the header, then one row per observation. Absent cells are written
/// as `NaN`; numbers use the shortest representation that round-trips.
void write_csv(std::ostream& out, const DataMatrix& data);
void write_csv(const std::string& path, const DataMatrix& data);

std::string format_real(double v);

/// Per-class proportional split. Class quotas are rounded with the
/// largest-remainder method so the train total is round(fraction * n).
SplitPair stratified_split(const DataMatrix& data, double train_fraction, std::uint64_t seed);

/// Unstratified random split with round(fraction * n) training rows.
SplitPair random_split(const DataMatrix& data, double train_fraction, std::uint64_t seed);

/// Stratified fold assignment: returns fold id per row, in [0, folds).
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t n_classes, std::size_t folds,
                                          std::uint64_t seed);

ColumnStats column_stats(const DataMatrix& data, std::size_t col);

}  // namespace evoimpute
