#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "evoimpute/analysis.hpp"
#include "evoimpute/data_matrix.hpp"
#include "evoimpute/evolution.hpp"

namespace evoimpute {

struct RunConfig {
  std::vector<std::string> datasets;
  double missing_rate = 0.07;
  double train_fraction = 0.75;
  std::size_t repetitions = 20;
  EvolutionConfig evolution;
  std::uint64_t master_seed = 0;
  std::filesystem::path out_dir = "results";
  bool stratify = true;
  bool missing_arm = true;   // false with --no-impute
  bool complete_arm = false;  // the regular-search control arm
  std::size_t jobs = 1;       // concurrent runs in a benchmark
  std::set<std::string> missing_tokens = default_missing_tokens();
  bool quiet = false;
};

/// File stem, used as the dataset id in every report.
std::string dataset_id_of(const std::string& path);

/// Seed of repetition r on a dataset: hash(master, dataset id, r).
std::uint64_t repetition_seed(std::uint64_t master, const std::string& dataset_id, std::size_t r);

/// The train/test partition is fixed per dataset and shared by every
/// repetition and arm.
std::uint64_t split_seed(std::uint64_t master, const std::string& dataset_id);

struct RunOutput {
  ExperimentRecord record;
  EvolutionResult evolution;
};

/// One repetition of the protocol: inject (missing arm, complete input only)
/// on the whole table, split, evolve on train, refit the best pipeline and
/// score it on test. Pipeline and evolution failures are reported in the
/// record rather than thrown.
RunOutput run_single(const DataMatrix& source, const std::string& dataset_id, std::size_t repetition,
                     const std::string& arm, const RunConfig& cfg, std::ostream* progress = nullptr);

/// Runs every (dataset, repetition, arm) not already recorded as successful
/// in out_dir/records.csv, then writes all reports. Returns the number of
/// failed runs.
std::size_t run_benchmark(const RunConfig& cfg, std::ostream& log);

/// Regenerates imputer_freq.csv, pair_freq.csv, significance.csv and
/// summary.txt from the given records.
void write_reports(const std::filesystem::path& out_dir, std::span<const ExperimentRecord> records);

std::vector<ExperimentRecord> load_records(const std::filesystem::path& file);

}  // namespace evoimpute
