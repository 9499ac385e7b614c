#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evoimpute/data_matrix.hpp"
#include "evoimpute/evolution.hpp"

namespace evoimpute {

/// One evolve-and-score run.
struct ExperimentRecord {
  std::string dataset_id;
  std::size_t repetition = 0;
  std::string arm;  // "missing" or "complete"
  std::uint64_t run_seed = 0;
  double missing_rate = 0.0;
  std::string best_pipeline;
  double cv_accuracy = 0.0;
  double holdout_accuracy = 0.0;
  double majority_baseline = 0.0;
  std::optional<std::string> imputer_name;  // absent iff missing_rate == 0
  std::string classifier_name;
  std::size_t pipeline_size = 0;
  std::size_t generations_run = 0;
  bool ok = true;
  std::string error;
  double wall_time = 0.0;  // seconds; kept out of records.csv so reruns compare byte-for-byte

  friend bool operator==(const ExperimentRecord&, const ExperimentRecord&) = default;
};

/// Refits the pipeline on all of `train` and returns its accuracy on `test`.
/// Throws on pipeline failure.
double holdout_score(const Individual& ind, const DataMatrix& train, const DataMatrix& test, std::uint64_t seed);

/// Accuracy on `test` of always predicting the most common class of `train`
/// (ties to the lower class id).
double majority_baseline(const DataMatrix& train, const DataMatrix& test);

struct RankTest {
  double z = 0.0;
  double p_value = 1.0;
};

/// Two-group Dunn comparison: pooled mid-ranks, tie-corrected variance,
/// two-sided normal p-value. Both samples need at least 5 values.
RankTest dunn_test(std::span<const double> x, std::span<const double> y);
double pairwise_rank_test(std::span<const double> x, std::span<const double> y);

inline constexpr double kSignificance = 0.05;

struct FrequencyTables {
  std::vector<std::string> datasets;     // sorted
  std::vector<std::string> imputers;     // every known imputer, fixed order
  std::vector<std::string> classifiers;  // every known classifier, fixed order
  std::vector<std::vector<std::size_t>> imputer_counts;  // [dataset][imputer]
  std::vector<std::vector<std::size_t>> pair_counts;     // [imputer][classifier]
  std::vector<std::vector<std::size_t>> pair_coverage;   // [imputer][classifier], distinct datasets
};

/// Counts over successful runs whose best pipeline has an imputer.
FrequencyTables frequency_tables(std::span<const ExperimentRecord> records);

struct SignificanceRow {
  std::string dataset_id;
  std::size_t n_missing = 0;
  std::size_t n_complete = 0;
  double mean_missing = 0.0;
  double mean_complete = 0.0;
  std::optional<double> z;
  std::optional<double> p_value;  // absent when either arm has fewer than 5 runs

  bool significant() const { return p_value && *p_value < kSignificance; }
  friend bool operator==(const SignificanceRow&, const SignificanceRow&) = default;
};

/// One row per dataset comparing holdout accuracy of the missing and complete arms.
std::vector<SignificanceRow> significance_table(std::span<const ExperimentRecord> records);

// Report files. Each writer has a reader that parses its output back.
void write_records(std::ostream& out, std::span<const ExperimentRecord> records);
std::vector<ExperimentRecord> read_records(std::istream& in);

void write_imputer_freq(std::ostream& out, const FrequencyTables& t);
void write_pair_freq(std::ostream& out, const FrequencyTables& t);
/// Rebuilds tables from imputer_freq.csv and pair_freq.csv.
FrequencyTables read_frequency_tables(std::istream& imputer_freq, std::istream& pair_freq);

void write_significance(std::ostream& out, std::span<const SignificanceRow> rows);
std::vector<SignificanceRow> read_significance(std::istream& in);

void write_summary(std::ostream& out, std::span<const ExperimentRecord> records, const FrequencyTables& t,
                   std::span<const SignificanceRow> sig);

/// Sort order used for every records.csv: dataset, repetition, arm.
void sort_records(std::vector<ExperimentRecord>& records);

}  // namespace evoimpute
