#include "evoimpute/experiment.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include "evoimpute/catalog.hpp"
#include "evoimpute/csv.hpp"
#include "evoimpute/injector.hpp"
#include "evoimpute/random.hpp"

namespace evoimpute {

namespace fs = std::filesystem;

std::string dataset_id_of(const std::string& path) { return fs::path(path).stem().string(); }

std::uint64_t repetition_seed(std::uint64_t master, const std::string& dataset_id, std::size_t r) {
  return derive_seed(master, hash_string(dataset_id), r);
}

std::uint64_t split_seed(std::uint64_t master, const std::string& dataset_id) {
  return derive_seed(master, hash_string(dataset_id), 0x5b117ULL, 0x5b117ULL);
}

RunOutput run_single(const DataMatrix& source, const std::string& dataset_id, std::size_t repetition,
                     const std::string& arm, const RunConfig& cfg, std::ostream* progress) {
  auto started = std::chrono::steady_clock::now();
  RunOutput out;
  ExperimentRecord& rec = out.record;
  rec.dataset_id = dataset_id;
  rec.repetition = repetition;
  rec.arm = arm;
  rec.run_seed = repetition_seed(cfg.master_seed, dataset_id, repetition);
  try {
    DataMatrix data = source;
    if (arm == "missing") {
      if (data.complete()) data = inject_mcar(data, {cfg.missing_rate, derive_seed(rec.run_seed, 1)});
    } else if (!data.complete()) {
      throw DataError("the complete-data arm needs a dataset without missing values");
    }
    if (arm == "missing") {
      rec.missing_rate = source.complete() ? cfg.missing_rate
                                           : static_cast<double>(data.missing_count()) /
                                                 static_cast<double>(data.n_rows() * data.n_cols());
    }

    std::uint64_t split = split_seed(cfg.master_seed, dataset_id);
    SplitPair parts =
        cfg.stratify ? stratified_split(data, cfg.train_fraction, split) : random_split(data, cfg.train_fraction, split);
    rec.majority_baseline = majority_baseline(parts.train, parts.test);

    Grammar grammar = default_grammar(!data.complete());
    EvolutionConfig ecfg = cfg.evolution;
    ecfg.seed = derive_seed(rec.run_seed, 2);
    // gaps may all land in the test split; the pipeline still needs an imputer
    ecfg.assume_missing = !data.complete();
    GenerationCallback report;
    if (progress) {
      report = [&](const GenerationStats& s) {
        *progress << dataset_id << " rep " << repetition << " " << arm << ": gen " << s.generation << " best "
                  << std::fixed << std::setprecision(4) << s.best_accuracy << std::defaultfloat << " front "
                  << s.front_size << " invalid " << s.invalid << '\n';
      };
    }
    out.evolution = evolve(parts.train, grammar, ecfg, report);
    rec.generations_run = out.evolution.history.empty() ? 0 : out.evolution.history.size() - 1;
    Individual best = best_pipeline(out.evolution.hall_of_fame);
    rec.best_pipeline = to_string(best.tree);
    rec.cv_accuracy = best.fitness.accuracy;
    rec.pipeline_size = best.tree.size();
    rec.imputer_name = imputer_of(best.tree, grammar);
    rec.classifier_name = classifier_of(best.tree);
    rec.holdout_accuracy = holdout_score(best, parts.train, parts.test, derive_seed(rec.run_seed, 3));
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

std::vector<ExperimentRecord> load_records(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot read '" + file.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  // a run killed mid-write leaves at most one unterminated line
  if (!text.empty() && text.back() != '\n') text.erase(text.find_last_of('\n') + 1);
  std::istringstream complete(text);
  return read_records(complete);
}

void write_reports(const fs::path& out_dir, std::span<const ExperimentRecord> records) {
  fs::create_directories(out_dir);
  FrequencyTables tables = frequency_tables(records);
  std::vector<SignificanceRow> sig = significance_table(records);
  auto open = [&](const char* name) {
    std::ofstream f(out_dir / name, std::ios::binary);
    if (!f) throw DataError("cannot write '" + (out_dir / name).string() + "'");
    return f;
  };
  {
    auto f = open("imputer_freq.csv");
    write_imputer_freq(f, tables);
  }
  {
    auto f = open("pair_freq.csv");
    write_pair_freq(f, tables);
  }
  {
    auto f = open("significance.csv");
    write_significance(f, sig);
  }
  {
    auto f = open("summary.txt");
    write_summary(f, records, tables, sig);
  }
}

std::size_t run_benchmark(const RunConfig& cfg, std::ostream& log) {
  if (cfg.datasets.empty()) throw DataError("no datasets given");
  if (!cfg.missing_arm && !cfg.complete_arm) throw DataError("no experiment arm selected");
  fs::create_directories(cfg.out_dir);
  const fs::path records_path = cfg.out_dir / "records.csv";
  const fs::path timings_path = cfg.out_dir / "timings.csv";

  std::vector<ExperimentRecord> kept;
  std::set<std::tuple<std::string, std::size_t, std::string>> done;
  if (fs::exists(records_path)) {
    for (auto& r : load_records(records_path)) {
      if (!r.ok) continue;  // failed runs are retried
      if (done.emplace(r.dataset_id, r.repetition, r.arm).second) kept.push_back(std::move(r));
    }
  }

  struct Task {
    std::size_t dataset;
    std::size_t repetition;
    std::string arm;
  };
  // an unreadable dataset fails its runs rather than the whole benchmark
  std::vector<std::optional<DataMatrix>> tables;
  std::vector<std::string> load_errors;
  std::vector<std::string> ids;
  std::vector<Task> tasks;
  for (std::size_t d = 0; d < cfg.datasets.size(); ++d) {
    try {
      tables.emplace_back(load_csv(cfg.datasets[d], cfg.missing_tokens));
      load_errors.emplace_back();
    } catch (const std::exception& e) {
      tables.emplace_back();
      load_errors.emplace_back(e.what());
    }
    ids.push_back(dataset_id_of(cfg.datasets[d]));
    for (std::size_t r = 0; r < cfg.repetitions; ++r) {
      for (const char* arm : {"missing", "complete"}) {
        if ((arm[0] == 'm' && !cfg.missing_arm) || (arm[0] == 'c' && !cfg.complete_arm)) continue;
        if (done.count({ids[d], r, arm})) continue;
        tasks.push_back({d, r, arm});
      }
    }
  }
  if (!cfg.quiet) log << tasks.size() << " runs to do, " << kept.size() << " already recorded\n";

  // The manifest is rewritten with the kept rows, then appended to as runs
  // finish, so an interrupted benchmark can resume.
  {
    std::ofstream f(records_path, std::ios::binary | std::ios::trunc);
    write_records(f, kept);
  }
  bool new_timings = !fs::exists(timings_path);
  std::ofstream timings(timings_path, std::ios::binary | std::ios::app);
  if (new_timings) timings << "dataset_id,repetition,arm,wall_time\n";

  std::mutex mu;
  std::vector<ExperimentRecord> fresh;
  auto run_task = [&](const Task& t) {
    std::ostringstream buffered;
    std::ostream* progress = nullptr;
    if (!cfg.quiet) progress = cfg.jobs == 1 ? &log : &buffered;
    RunOutput out;
    if (tables[t.dataset]) {
      out = run_single(*tables[t.dataset], ids[t.dataset], t.repetition, t.arm, cfg, progress);
    } else {
      out.record.dataset_id = ids[t.dataset];
      out.record.repetition = t.repetition;
      out.record.arm = t.arm;
      out.record.run_seed = repetition_seed(cfg.master_seed, ids[t.dataset], t.repetition);
      out.record.ok = false;
      out.record.error = load_errors[t.dataset];
    }
    std::lock_guard lock(mu);
    if (!cfg.quiet) {
      log << buffered.str();
      log << ids[t.dataset] << " rep " << t.repetition << " " << t.arm << ": "
          << (out.record.ok ? "holdout " + format_real(out.record.holdout_accuracy) : "FAILED " + out.record.error)
          << '\n';
    }
    std::ofstream f(records_path, std::ios::binary | std::ios::app);
    std::ostringstream row;
    write_records(row, std::span<const ExperimentRecord>(&out.record, 1));
    std::string text = row.str();
    f << text.substr(text.find('\n') + 1) << std::flush;
    timings << csv::join({out.record.dataset_id, std::to_string(out.record.repetition), out.record.arm,
                          format_real(out.record.wall_time)})
            << '\n'
            << std::flush;
    fresh.push_back(std::move(out.record));
  };

  std::size_t workers = std::min(cfg.jobs, tasks.size());
  if (workers <= 1) {
    for (const Task& t : tasks) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();) run_task(tasks[i]);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::size_t failures = 0;
  for (const auto& r : fresh) failures += !r.ok;
  kept.insert(kept.end(), std::make_move_iterator(fresh.begin()), std::make_move_iterator(fresh.end()));
  sort_records(kept);
  {
    std::ofstream f(records_path, std::ios::binary | std::ios::trunc);
    write_records(f, kept);
  }
  write_reports(cfg.out_dir, kept);
  if (!cfg.quiet) log << "done: " << kept.size() << " runs recorded, " << failures << " failed\n";
  return failures;
}

}  // namespace evoimpute
