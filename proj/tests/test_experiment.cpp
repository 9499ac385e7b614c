#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "evoimpute/experiment.hpp"
#include "evoimpute/injector.hpp"
#include "support.hpp"

using namespace evoimpute;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("evoimpute_test_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunConfig quick(const Scratch& s, std::vector<std::string> datasets) {
  RunConfig cfg;
  cfg.datasets = std::move(datasets);
  cfg.repetitions = 3;
  cfg.evolution.pop_size = 6;
  cfg.evolution.generations = 1;
  cfg.master_seed = 5;
  cfg.out_dir = s.dir / "out";
  cfg.quiet = true;
  return cfg;
}

std::vector<std::string> two_datasets(const Scratch& s) {
  std::string a = (s.dir / "alpha.csv").string(), b = (s.dir / "beta.csv").string();
  write_csv(a, testing::blobs(60, 3, 3.0, 1));
  write_csv(b, testing::blobs(60, 2, 3.0, 2));
  return {a, b};
}

}  // namespace

TEST_CASE("seeds are stable and distinct") {
  CHECK(dataset_id_of("/x/y/iris.csv") == "iris");
  CHECK(repetition_seed(1, "iris", 0) == repetition_seed(1, "iris", 0));
  CHECK(repetition_seed(1, "iris", 0) != repetition_seed(1, "iris", 1));
  CHECK(repetition_seed(1, "iris", 0) != repetition_seed(1, "wine", 0));
  CHECK(split_seed(1, "iris") != split_seed(2, "iris"));
}

TEST_CASE("a single run fills in its record") {
  DataMatrix d = testing::blobs(80, 3, 4.0, 3);
  RunConfig cfg;
  cfg.evolution.pop_size = 10;
  cfg.evolution.generations = 2;
  std::ostringstream progress;
  RunOutput out = run_single(d, "toy", 0, "missing", cfg, &progress);
  const ExperimentRecord& r = out.record;
  CHECK(r.ok);
  CHECK(r.missing_rate == 0.07);
  CHECK(r.imputer_name.has_value());
  CHECK(r.holdout_accuracy > r.majority_baseline);
  CHECK(r.generations_run == 2);
  CHECK(progress.str().find("gen 2") != std::string::npos);

  RunOutput control = run_single(d, "toy", 0, "complete", cfg);
  CHECK(control.record.ok);
  CHECK(control.record.missing_rate == 0.0);
  CHECK_FALSE(control.record.imputer_name.has_value());

  // same inputs, same record
  RunOutput again = run_single(d, "toy", 0, "missing", cfg);
  out.record.wall_time = again.record.wall_time = 0;
  CHECK(again.record == out.record);
}

TEST_CASE("zero generations still yields a record") {
  RunConfig cfg;
  cfg.evolution.pop_size = 8;
  cfg.evolution.generations = 0;
  RunOutput out = run_single(testing::blobs(60, 2, 4.0, 4), "toy", 0, "missing", cfg);
  CHECK(out.record.ok);
  CHECK_FALSE(out.record.best_pipeline.empty());
}

TEST_CASE("the control arm refuses data that already has gaps") {
  DataMatrix gappy = inject_mcar(testing::blobs(60, 2, 4.0, 4), {0.1, 1});
  RunConfig cfg;
  cfg.evolution.pop_size = 6;
  cfg.evolution.generations = 0;
  CHECK_FALSE(run_single(gappy, "toy", 0, "complete", cfg).record.ok);
  RunOutput native = run_single(gappy, "toy", 0, "missing", cfg);
  CHECK(native.record.ok);
  CHECK(native.record.missing_rate == doctest::Approx(0.1));
}

TEST_CASE("benchmark writes one row per run and every report") {
  Scratch s("bench");
  RunConfig cfg = quick(s, two_datasets(s));
  std::ostringstream log;
  CHECK(run_benchmark(cfg, log) == 0);
  CHECK(load_records(cfg.out_dir / "records.csv").size() == 6);
  for (const char* f : {"imputer_freq.csv", "pair_freq.csv", "significance.csv", "summary.txt"}) {
    CAPTURE(f);
    CHECK(fs::exists(cfg.out_dir / f));
  }
  std::ifstream sig(cfg.out_dir / "significance.csv");
  CHECK(read_significance(sig).size() == 2);

  Scratch s2("bench_control");
  RunConfig both = quick(s2, two_datasets(s2));
  both.complete_arm = true;
  CHECK(run_benchmark(both, log) == 0);
  CHECK(load_records(both.out_dir / "records.csv").size() == 12);
}

TEST_CASE("benchmark is byte-for-byte repeatable and resumes without redoing work") {
  Scratch s("resume");
  RunConfig cfg = quick(s, two_datasets(s));
  std::ostringstream log;
  run_benchmark(cfg, log);
  const std::string first = slurp(cfg.out_dir / "records.csv");

  // forget one finished run plus a half-written line, then resume
  auto records = load_records(cfg.out_dir / "records.csv");
  records.erase(records.begin() + 2);
  {
    std::ofstream out(cfg.out_dir / "records.csv", std::ios::binary);
    write_records(out, records);
    out << "beta,2,miss";
  }
  std::ostringstream resumed;
  run_benchmark(cfg, resumed);
  CHECK(slurp(cfg.out_dir / "records.csv") == first);
  std::ifstream timings(cfg.out_dir / "timings.csv");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(timings, line)) ++lines;
  CHECK(lines == 1 + 6 + 1);  // header, first pass, the one rerun

  Scratch fresh("fresh");
  RunConfig again = cfg;
  again.out_dir = fresh.dir;
  run_benchmark(again, log);
  CHECK(slurp(again.out_dir / "records.csv") == first);
}

TEST_CASE("a missing dataset file fails its runs and the benchmark keeps going") {
  Scratch s("broken");
  auto files = two_datasets(s);
  files.push_back((s.dir / "nowhere.csv").string());
  RunConfig cfg = quick(s, files);
  std::ostringstream log;
  CHECK(run_benchmark(cfg, log) == 3);
  auto records = load_records(cfg.out_dir / "records.csv");
  CHECK(records.size() == 9);
  std::size_t failed = 0;
  for (const auto& r : records) failed += !r.ok;
  CHECK(failed == 3);
}
