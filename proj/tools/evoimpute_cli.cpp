// evoimpute command-line tool: inject, evolve, score, benchmark, report.

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "evoimpute/analysis.hpp"
#include "evoimpute/catalog.hpp"
#include "evoimpute/csv.hpp"
#include "evoimpute/experiment.hpp"
#include "evoimpute/injector.hpp"

namespace {

using namespace evoimpute;
namespace fs = std::filesystem;

constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::set<std::string> parse_tokens(const std::string& list) {
  std::set<std::string> out;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.insert(tok);
  if (!list.empty() && list.back() == ',') out.insert("");
  return out;
}

struct Options {
  std::vector<std::string> inputs;
  std::string input;
  std::string output;
  std::string pipeline;
  double rate = 0.07;
  std::uint64_t seed = 0;
  std::size_t pop = 100;
  std::size_t gens = 50;
  std::size_t folds = 3;
  std::size_t max_len = 4;
  double train_frac = 0.75;
  std::size_t reps = 20;
  bool no_impute = false;
  bool with_control = false;
  bool no_stratify = false;
  bool quiet = false;
  std::size_t jobs = 1;
  std::string missing_tokens = ",NaN,NA,?";
  std::string out_dir = "results";
  std::string config;
};

// Expands `--config FILE` into `--key=value` arguments for every key the
// command line does not already set.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  auto it = std::find_if(args.begin(), args.end(),
                         [](const std::string& a) { return a == "--config" || a.rfind("--config=", 0) == 0; });
  if (it == args.end()) return args;
  std::string path;
  if (*it == "--config") {
    if (it + 1 == args.end()) throw UsageError("--config needs a file");
    path = *(it + 1);
    args.erase(it, it + 2);
  } else {
    path = it->substr(9);
    args.erase(it);
  }
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path + "'");
  auto trim = [](std::string s) {
    auto first = s.find_first_not_of(" \t\r");
    auto last = s.find_last_not_of(" \t\r");
    return first == std::string::npos ? std::string() : s.substr(first, last - first + 1);
  };
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(n) + ": expected key=value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    std::replace(key.begin(), key.end(), '_', '-');
    std::string flag = "--" + key;
    bool given = std::any_of(args.begin(), args.end(),
                             [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
    if (!given) args.push_back(flag + "=" + value);
  }
  return args;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "key=value file supplying any flag; command-line flags win");
  cmd->add_option("--missing-tokens", o.missing_tokens, "comma-separated cell values read as missing")
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "master seed")->capture_default_str();
}

void add_search(CLI::App* cmd, Options& o) {
  cmd->add_option("--rate", o.rate, "MCAR missing-cell rate in [0, 1)")->capture_default_str();
  cmd->add_option("--pop", o.pop, "population size")->capture_default_str();
  cmd->add_option("--gens", o.gens, "generations")->capture_default_str();
  cmd->add_option("--folds", o.folds, "cross-validation folds")->capture_default_str();
  cmd->add_option("--max-len", o.max_len, "maximum operators per pipeline")->capture_default_str();
  cmd->add_option("--train-frac", o.train_frac, "training fraction of the split")->capture_default_str();
  cmd->add_flag("--no-impute", o.no_impute, "run the complete-data arm only (no injection, no imputers)");
  cmd->add_flag("--no-stratify", o.no_stratify, "unstratified train/test split");
  cmd->add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();
  cmd->add_flag("--quiet", o.quiet, "no progress lines");
}

void check_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw UsageError("--rate must be in [0, 1)");
}

RunConfig run_config(const Options& o) {
  check_rate(o.rate);
  if (!(o.train_frac > 0.0 && o.train_frac < 1.0)) throw UsageError("--train-frac must be in (0, 1)");
  RunConfig cfg;
  cfg.datasets = o.inputs;
  cfg.missing_rate = o.rate;
  cfg.train_fraction = o.train_frac;
  cfg.repetitions = o.reps;
  cfg.evolution.pop_size = o.pop;
  cfg.evolution.generations = o.gens;
  cfg.evolution.cv_folds = o.folds;
  cfg.evolution.max_pipeline_len = o.max_len;
  cfg.master_seed = o.seed;
  cfg.out_dir = o.out_dir;
  cfg.stratify = !o.no_stratify;
  cfg.missing_arm = !o.no_impute;
  cfg.complete_arm = o.no_impute || o.with_control;
  cfg.jobs = o.jobs;
  cfg.missing_tokens = parse_tokens(o.missing_tokens);
  cfg.quiet = o.quiet;
  return cfg;
}

int cmd_inject(const Options& o) {
  check_rate(o.rate);
  DataMatrix data = load_csv(o.input, parse_tokens(o.missing_tokens));
  if (mcar_cell_count(data.n_rows(), data.n_cols(), o.rate) == 0 && data.complete()) {
    // nothing to blank: keep the file exactly as it was
    fs::copy_file(o.input, o.output, fs::copy_options::overwrite_existing);
    return 0;
  }
  write_csv(o.output, inject_mcar(data, {o.rate, o.seed}));
  return 0;
}

int cmd_evolve(const Options& o) {
  RunConfig cfg = run_config(o);
  cfg.evolution.jobs = o.jobs;
  fs::create_directories(cfg.out_dir);
  DataMatrix data = load_csv(o.input, cfg.missing_tokens);
  std::string id = dataset_id_of(o.input);
  RunOutput out = run_single(data, id, 0, cfg.missing_arm ? "missing" : "complete", cfg, cfg.quiet ? nullptr : &std::cerr);
  {
    std::ofstream f(cfg.out_dir / "records.csv", std::ios::binary);
    write_records(f, std::span<const ExperimentRecord>(&out.record, 1));
  }
  if (!out.record.ok) {
    std::cerr << "error: " << out.record.error << '\n';
    return 1;
  }
  {
    std::ofstream f(cfg.out_dir / "best_pipeline.txt", std::ios::binary);
    f << out.record.best_pipeline << '\n';
  }
  {
    std::ofstream f(cfg.out_dir / "hall_of_fame.csv", std::ios::binary);
    f << "pipeline,cv_accuracy,size\n";
    for (const Individual& ind : out.evolution.hall_of_fame) {
      f << csv::join({to_string(ind.tree), format_real(ind.fitness.accuracy), std::to_string(ind.fitness.size)}) << '\n';
    }
  }
  std::cout << out.record.best_pipeline << '\n'
            << "cv accuracy " << format_real(out.record.cv_accuracy) << ", holdout accuracy "
            << format_real(out.record.holdout_accuracy) << '\n';
  return 0;
}

int cmd_score(const Options& o) {
  if (!(o.train_frac > 0.0 && o.train_frac < 1.0)) throw UsageError("--train-frac must be in (0, 1)");
  auto tokens = parse_tokens(o.missing_tokens);
  DataMatrix first = load_csv(o.inputs.at(0), tokens);
  std::optional<SplitPair> split;
  if (o.inputs.size() < 2) {
    split = o.no_stratify ? random_split(first, o.train_frac, o.seed) : stratified_split(first, o.train_frac, o.seed);
  }
  const DataMatrix& train = split ? split->train : first;
  DataMatrix test = split ? split->test : load_csv(o.inputs.at(1), tokens);
  Grammar grammar = default_grammar(true);
  Individual ind;
  ind.tree = parse_pipeline(o.pipeline, grammar);
  bool gaps = !train.complete() || !test.complete();
  if (auto err = validation_error(ind.tree, grammar, gaps ? Completeness::MayContainMissing : Completeness::Complete,
                                  ind.tree.size())) {
    throw DataError("invalid pipeline: " + *err);
  }
  std::cout << format_real(holdout_score(ind, train, test, o.seed)) << '\n';
  return 0;
}

int cmd_benchmark(const Options& o) {
  RunConfig cfg = run_config(o);
  if (o.jobs == 0) throw UsageError("--jobs must be positive");
  std::size_t failures = run_benchmark(cfg, std::cerr);
  return failures == 0 ? 0 : 1;
}

int cmd_report(const Options& o) {
  fs::path dir = o.out_dir;
  auto records = load_records(dir / "records.csv");
  write_reports(dir, records);
  std::ifstream summary(dir / "summary.txt");
  std::cout << summary.rdbuf();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evolve imputer -> transform -> classifier pipelines on data with missing values"};
  app.require_subcommand(1);
  Options o;

  auto* inject = app.add_subcommand("inject", "blank a fraction of feature cells completely at random");
  add_common(inject, o);
  inject->add_option("--rate", o.rate, "missing-cell rate in [0, 1)")->capture_default_str();
  inject->add_option("input", o.input, "complete CSV")->required();
  inject->add_option("output", o.output, "output CSV")->required();

  auto* evolve_cmd = app.add_subcommand("evolve", "inject, split, evolve and score one run");
  add_common(evolve_cmd, o);
  add_search(evolve_cmd, o);
  evolve_cmd->add_option("--jobs", o.jobs, "threads for fitness evaluation")->capture_default_str();
  evolve_cmd->add_option("input", o.input, "dataset CSV")->required();

  auto* score = app.add_subcommand("score", "refit a pipeline on training data and report test accuracy");
  add_common(score, o);
  score->add_option("--pipeline", o.pipeline, "pipeline in bracketed form")->required();
  score->add_option("--train-frac", o.train_frac, "split fraction when no test CSV is given")->capture_default_str();
  score->add_flag("--no-stratify", o.no_stratify, "unstratified split");
  score->add_option("inputs", o.inputs, "train CSV [test CSV]")->required()->expected(1, 2);

  auto* bench = app.add_subcommand("benchmark", "repeated runs over datasets, then reports");
  add_common(bench, o);
  add_search(bench, o);
  bench->add_option("--reps", o.reps, "repetitions per dataset")->capture_default_str();
  bench->add_option("--jobs", o.jobs, "concurrent runs")->capture_default_str();
  bench->add_flag("--with-control", o.with_control, "also run the complete-data arm");
  bench->add_option("inputs", o.inputs, "dataset CSVs")->required();

  auto* report = app.add_subcommand("report", "rebuild report files from records.csv");
  report->add_option("--out-dir", o.out_dir, "directory holding records.csv")->capture_default_str();

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector
    app.parse(args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*inject) return cmd_inject(o);
    if (*evolve_cmd) return cmd_evolve(o);
    if (*score) return cmd_score(o);
    if (*bench) return cmd_benchmark(o);
    if (*report) return cmd_report(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kUsageError;
}
