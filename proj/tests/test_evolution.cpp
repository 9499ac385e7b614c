#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "evoimpute/evolution.hpp"
#include "evoimpute/injector.hpp"
#include "support.hpp"

using namespace evoimpute;

namespace {

const Grammar& full_grammar() {
  static const Grammar g = default_grammar(true);
  return g;
}

GpContext missing_ctx(std::size_t max_len = 4) { return {&full_grammar(), Completeness::MayContainMissing, max_len}; }

PipelineTree tree(const char* text) { return parse_pipeline(text, full_grammar()); }

bool valid(const PipelineTree& t, const GpContext& ctx) {
  return !validation_error(t, *ctx.grammar, ctx.data_tag, ctx.max_len);
}

// Peel off non-dominated layers one at a time.
std::vector<std::size_t> brute_ranks(const std::vector<Fitness>& f) {
  std::vector<std::size_t> rank(f.size(), 0);
  std::vector<bool> done(f.size(), false);
  std::size_t left = f.size();
  for (std::size_t r = 0; left > 0; ++r) {
    std::vector<std::size_t> layer;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (done[i]) continue;
      bool dominated = false;
      for (std::size_t j = 0; j < f.size() && !dominated; ++j) {
        dominated = !done[j] && j != i && f[j].accuracy >= f[i].accuracy && f[j].size <= f[i].size &&
                    (f[j].accuracy > f[i].accuracy || f[j].size < f[i].size);
      }
      if (!dominated) layer.push_back(i);
    }
    for (std::size_t i : layer) {
      rank[i] = r;
      done[i] = true;
      --left;
    }
  }
  return rank;
}

Individual scored(double acc, std::size_t size, std::uint64_t discovery = 0) {
  Individual ind;
  ind.tree.nodes = {OperatorNode{"GaussianNB", {}}};
  for (std::size_t i = 1; i < size; ++i) ind.tree.nodes.push_back(OperatorNode{"StandardScaler", {}});
  ind.fitness = {acc, size};
  ind.valid = ind.evaluated = true;
  ind.discovery = discovery;
  return ind;
}

DataMatrix separable_with_gaps(std::uint64_t seed) {
  return inject_mcar(testing::blobs(120, 4, 4.0, seed), {0.07, seed});
}

EvolutionConfig small_config(std::uint64_t seed) {
  EvolutionConfig cfg;
  cfg.pop_size = 12;
  cfg.generations = 3;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("max_len 2 on data with gaps forces classifier over imputer") {
  GpContext ctx = missing_ctx(2);
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    PipelineTree t = random_tree(ctx, rng);
    REQUIRE(t.size() == 2);
    REQUIRE(full_grammar().at(t.nodes[0].primitive).role == Role::Classifier);
    REQUIRE(full_grammar().at(t.nodes[1].primitive).role == Role::Imputer);
  }
}

TEST_CASE("complete data never grows an imputer") {
  GpContext ctx{&full_grammar(), Completeness::Complete, 4};
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) REQUIRE_FALSE(imputer_of(random_tree(ctx, rng), full_grammar()));
}

TEST_CASE("property: random trees are valid and classifiers are uniform within 3 sigma") {
  GpContext ctx = missing_ctx();
  Rng rng(6);
  const int n = 1000;
  std::map<std::string, int> counts;
  std::map<std::size_t, int> lengths;
  for (int i = 0; i < n; ++i) {
    PipelineTree t = random_tree(ctx, rng);
    REQUIRE(valid(t, ctx));
    ++counts[t.nodes[0].primitive];
    ++lengths[t.size()];
  }
  const double k = static_cast<double>(full_grammar().of_role(Role::Classifier).size());
  CHECK(counts.size() == full_grammar().of_role(Role::Classifier).size());
  const double p = 1.0 / k, sigma = std::sqrt(n * p * (1 - p));
  for (const auto& [name, c] : counts) {
    CAPTURE(name);
    CHECK(std::abs(c - n * p) <= 3 * sigma);
  }
  // transform count uniform in {0, 1, 2}
  CHECK(lengths.size() == 3);
}

TEST_CASE("the paper's crossover example swaps the scaler subtrees") {
  PipelineTree a = tree("[MultinomialNB, [MaxAbsScaler, [MFImputer, input_matrix], true], 1, true]");
  PipelineTree b = tree("[KNeighborsClassifier, [PCA, [MICEImputer, input_matrix, 11, 6], 2], 45, 1, distance]");
  auto [c, d] = swap_subtrees(a, 1, b, 1);
  CHECK(to_string(c) == "[MultinomialNB, [PCA, [MICEImputer, input_matrix, 11, 6], 2], 1, true]");
  CHECK(to_string(d) == "[KNN, [MaxAbsScaler, [MFImputer, input_matrix], true], 45, 1, distance]");

  // random crossover only ever picks one of the two type-compatible cut points
  std::set<std::string> seen;
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    auto [x, y] = crossover(a, b, missing_ctx(), rng);
    seen.insert(to_string(x) + " | " + to_string(y));
  }
  CHECK(seen.size() == 2);
  CHECK(seen.count(to_string(c) + " | " + to_string(d)) == 1);
  CHECK(seen.count("[MultinomialNB, [MaxAbsScaler, [MICEImputer, input_matrix, 11, 6], true], 1, true] | "
                   "[KNN, [PCA, [MFImputer, input_matrix], 2], 45, 1, distance]") == 1);
}

TEST_CASE("crossing a tree with itself returns it twice") {
  PipelineTree a = tree("[MultinomialNB, [MaxAbsScaler, [MFImputer, input_matrix], true], 1, true]");
  Rng rng(8);
  auto [x, y] = crossover(a, a, missing_ctx(), rng);
  CHECK(x == a);
  CHECK(y == a);
}

TEST_CASE("the paper's mutation example: alpha 1 becomes 10") {
  PipelineTree a = tree("[MultinomialNB, [MaxAbsScaler, [MFImputer, input_matrix], true], 1, true]");
  const std::string want = "[MultinomialNB, [MaxAbsScaler, [MFImputer, input_matrix], true], 10, true]";
  bool found = false;
  for (std::uint64_t s = 0; s < 500 && !found; ++s) {
    Rng rng(s);
    PipelineTree m = mutate_as(MutationKind::TerminalReplace, a, missing_ctx(), rng);
    REQUIRE(m != a);
    REQUIRE(m.size() == a.size());
    found = to_string(m) == want;
  }
  CHECK(found);
}

TEST_CASE("terminal replacement changes exactly one terminal") {
  PipelineTree a = tree("[KNN, [PCA, [MICEImputer, input_matrix, 11, 6], 2], 45, 1, distance]");
  Rng rng(9);
  for (int i = 0; i < 500; ++i) {
    PipelineTree m = mutate_as(MutationKind::TerminalReplace, a, missing_ctx(), rng);
    int changed = 0;
    for (std::size_t n = 0; n < a.size(); ++n) {
      REQUIRE(m.nodes[n].primitive == a.nodes[n].primitive);
      for (std::size_t t = 0; t < a.nodes[n].terminals.size(); ++t) changed += m.nodes[n].terminals[t] != a.nodes[n].terminals[t];
    }
    REQUIRE(changed == 1);
  }
}

TEST_CASE("insert/remove on a transform-free tree inserts, on a full tree removes") {
  PipelineTree bare = tree("[GaussianNB, [MeanImputer, input_matrix]]");
  PipelineTree full = tree("[GaussianNB, [StandardScaler, [MinMaxScaler, [MeanImputer, input_matrix]]]]");
  Rng rng(10);
  for (int i = 0; i < 100; ++i) {
    REQUIRE(mutate_as(MutationKind::InsertRemove, bare, missing_ctx(), rng).size() == 3);
    REQUIRE(mutate_as(MutationKind::InsertRemove, full, missing_ctx(), rng).size() == 3);
  }
}

TEST_CASE("operator replacement keeps the role") {
  PipelineTree a = tree("[KNN, [PCA, [MICEImputer, input_matrix, 11, 6], 2], 45, 1, distance]");
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    PipelineTree m = mutate_as(MutationKind::OperatorReplace, a, missing_ctx(), rng);
    REQUIRE(m.size() == a.size());
    REQUIRE(valid(m, missing_ctx()));
    int changed = 0;
    for (std::size_t n = 0; n < a.size(); ++n) {
      REQUIRE(full_grammar().at(m.nodes[n].primitive).role == full_grammar().at(a.nodes[n].primitive).role);
      changed += m.nodes[n].primitive != a.nodes[n].primitive;
    }
    REQUIRE(changed == 1);
  }
}

TEST_CASE("property: 100k genetic operations all yield valid trees") {
  for (Completeness tag : {Completeness::MayContainMissing, Completeness::Complete}) {
    for (std::size_t max_len : {2u, 3u, 4u, 6u}) {
      GpContext ctx{&full_grammar(), tag, max_len};
      Rng rng(derive_seed(12, max_len, static_cast<std::uint64_t>(tag)));
      std::vector<PipelineTree> pool;
      for (int i = 0; i < 30; ++i) pool.push_back(random_tree(ctx, rng));
      for (int op = 0; op < 12500; ++op) {
        std::size_t i = uniform_index(rng, pool.size()), j = uniform_index(rng, pool.size());
        if (op % 2) {
          auto [x, y] = crossover(pool[i], pool[j], ctx, rng);
          REQUIRE(valid(x, ctx));
          REQUIRE(valid(y, ctx));
          pool[i] = std::move(x);
          pool[j] = std::move(y);
        } else {
          PipelineTree m = mutate(pool[i], ctx, rng);
          REQUIRE(valid(m, ctx));
          pool[i] = std::move(m);
        }
      }
    }
  }
}

TEST_CASE("non-dominated sorting on the worked example") {
  std::vector<Fitness> f{{0.9, 3}, {0.8, 1}, {0.7, 5}};
  CHECK(nondominated_ranks(f) == std::vector<std::size_t>{0, 0, 1});
  CHECK(dominates(f[0], f[2]));
  CHECK_FALSE(dominates(f[0], f[1]));
  CHECK_FALSE(dominates(f[0], f[0]));
}

TEST_CASE("identical fitnesses select the first indices") {
  std::vector<Fitness> f(5, Fitness{0.5, 2});
  CHECK(nsga2_select_indices(f, 2) == std::vector<std::size_t>{0, 1});
  CHECK_THROWS(nsga2_select_indices(f, 6));
}

TEST_CASE("crowding keeps the front's extremes") {
  std::vector<Fitness> f{{0.5, 3}, {0.9, 5}, {0.6, 4}, {0.3, 1}, {0.62, 4}};
  // first front: all but (0.6, 4); extremes are (0.3, 1) and (0.9, 5)
  CHECK(nondominated_ranks(f) == std::vector<std::size_t>{0, 0, 1, 0, 0});
  auto pick = nsga2_select_indices(f, 2);
  std::sort(pick.begin(), pick.end());
  CHECK(pick == std::vector<std::size_t>{1, 3});
}

TEST_CASE("property: fast sort agrees with the peeling oracle") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Fitness> f;
    for (int i = 0; i < 200; ++i) f.push_back({std::round(uniform01(rng) * 20) / 20, 1 + uniform_index(rng, 6)});
    REQUIRE(nondominated_ranks(f) == brute_ranks(f));
    auto pick = nsga2_select_indices(f, 50);
    REQUIRE(std::set<std::size_t>(pick.begin(), pick.end()).size() == 50);
    // a chosen individual never sits in a worse front than an unchosen one
    auto rank = brute_ranks(f);
    std::size_t worst_in = 0, best_out = SIZE_MAX;
    std::set<std::size_t> in(pick.begin(), pick.end());
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (in.count(i)) worst_in = std::max(worst_in, rank[i]);
      else best_out = std::min(best_out, rank[i]);
    }
    REQUIRE(worst_in <= best_out);
  }
}

TEST_CASE("best_pipeline prefers accuracy, then size, then discovery") {
  std::vector<Individual> hof{scored(0.9, 3, 0), scored(0.9, 1, 1)};
  CHECK(best_pipeline(hof).fitness == Fitness{0.9, 1});
  std::vector<Individual> twins{scored(0.8, 2, 5), scored(0.8, 2, 3)};
  CHECK(best_pipeline(twins).discovery == 3);
  std::vector<Individual> one{scored(0.4, 2)};
  CHECK(best_pipeline(one).fitness == Fitness{0.4, 2});
  CHECK_THROWS(best_pipeline(std::vector<Individual>{}));
}

TEST_CASE("hall of fame keeps only mutually non-dominated valid entries") {
  HallOfFame hof;
  CHECK(hof.update(scored(0.7, 3)));
  CHECK(hof.update(scored(0.8, 1)));  // evicts (0.7, 3)
  CHECK(hof.members().size() == 1);
  CHECK_FALSE(hof.update(scored(0.6, 2)));
  CHECK(hof.update(scored(0.9, 4)));
  Individual bad = scored(0.95, 1);
  bad.valid = false;
  CHECK_FALSE(hof.update(bad));
  CHECK_FALSE(hof.update(hof.members().front()));
  CHECK(hof.members().size() == 2);
}

TEST_CASE("evaluate: majority baseline, declared failure, node count") {
  // constant features: the depth-1 tree cannot split and predicts the majority class
  std::vector<std::vector<double>> rows(30, {1.0, 2.0});
  std::vector<int> labels;
  for (int i = 0; i < 30; ++i) labels.push_back(i < 21 ? 0 : 1);
  DataMatrix d = testing::make_matrix(rows, labels);
  GpContext ctx{&full_grammar(), Completeness::Complete, 4};
  CvPlan plan = make_cv_plan(d, 3, 1);
  Individual ind;
  ind.tree = tree("[DecisionTree, input_matrix, gini, 1, 2]");
  Individual out = evaluate(ind, plan, ctx, 1);
  CHECK(out.valid);
  CHECK(out.fitness.accuracy == doctest::Approx(0.7));
  CHECK(out.fitness.size == 1);

  DataMatrix negatives = inject_mcar(testing::blobs(60, 3, 1.0, 3), {0.07, 3});
  CvPlan plan2 = make_cv_plan(negatives, 3, 2);
  ind.tree = tree("[MultinomialNB, [MeanImputer, input_matrix], 1, true]");
  out = evaluate(ind, plan2, missing_ctx(), 2);
  CHECK_FALSE(out.valid);
  CHECK(out.fitness.accuracy == 0.0);
  CHECK_FALSE(out.error.empty());

  ind.tree = tree("[GaussianNB, [StandardScaler, [MeanImputer, input_matrix]]]");
  out = evaluate(ind, plan2, missing_ctx(), 2);
  CHECK(out.valid);
  CHECK(out.fitness.size == 3);
}

TEST_CASE("evaluate fits only on fold-train rows") {
  DataMatrix d = separable_with_gaps(14);
  CvPlan plan = make_cv_plan(d, 3, 14);
  std::vector<std::set<std::size_t>> fit_ids, val_ids;
  for (std::size_t f = 0; f < 3; ++f) {
    fit_ids.emplace_back(plan.fit[f].row_ids().begin(), plan.fit[f].row_ids().end());
    val_ids.emplace_back(plan.validate[f].row_ids().begin(), plan.validate[f].row_ids().end());
    for (std::size_t r : val_ids[f]) REQUIRE(fit_ids[f].count(r) == 0);
  }
  Individual ind;
  ind.tree = tree("[KNN, [PCA, [MICEImputer, input_matrix, 3, 2], 2], 5, 2, uniform]");
  std::size_t calls = 0;
  Individual out = evaluate(ind, plan, missing_ctx(), 3, [&](std::string_view, const DataMatrix& on) {
    std::set<std::size_t> ids(on.row_ids().begin(), on.row_ids().end());
    bool matches = false;
    for (std::size_t f = 0; f < 3; ++f) matches = matches || ids == fit_ids[f];
    CHECK(matches);
    ++calls;
  });
  CHECK(out.valid);
  CHECK(calls == 9);  // three stages in each of three folds
}

TEST_CASE("stratified plan needs enough members per class") {
  DataMatrix tiny = testing::make_matrix({{1}, {2}, {3}, {4}}, {0, 0, 0, 1});
  CHECK_THROWS(make_cv_plan(tiny, 3, 0));
}

TEST_CASE("zero generations: the hall of fame is the Pareto set of the initial population") {
  DataMatrix d = separable_with_gaps(15);
  EvolutionConfig cfg = small_config(15);
  cfg.generations = 0;
  EvolutionResult r = evolve(d, full_grammar(), cfg);
  CHECK(r.history.size() == 1);
  CHECK(r.evaluations == cfg.pop_size);
  std::vector<Fitness> front;
  for (const auto& ind : r.population) {
    if (!ind.valid) continue;
    bool dominated = false;
    for (const auto& other : r.population) dominated = dominated || (other.valid && dominates(other.fitness, ind.fitness));
    if (!dominated) front.push_back(ind.fitness);
  }
  for (const Fitness& f : front) {
    bool present = false;
    for (const auto& m : r.hall_of_fame) present = present || m.fitness == f;
    CHECK(present);
  }
  for (const auto& m : r.hall_of_fame) CHECK(std::find(front.begin(), front.end(), m.fitness) != front.end());
}

TEST_CASE("evolve is deterministic, monotone and keeps a clean front") {
  DataMatrix d = separable_with_gaps(16);
  EvolutionConfig cfg = small_config(16);
  std::vector<GenerationStats> stats;
  EvolutionResult a = evolve(d, full_grammar(), cfg, [&](const GenerationStats& s) { stats.push_back(s); });
  cfg.jobs = 3;
  EvolutionResult b = evolve(d, full_grammar(), cfg);

  CHECK(a.history.size() == cfg.generations + 1);
  CHECK(stats.size() == cfg.generations + 1);
  CHECK(std::is_sorted(a.history.begin(), a.history.end()));
  CHECK(a.history.back() == best_pipeline(a.hall_of_fame).fitness.accuracy);
  REQUIRE(a.hall_of_fame.size() == b.hall_of_fame.size());
  for (std::size_t i = 0; i < a.hall_of_fame.size(); ++i) {
    CHECK(a.hall_of_fame[i].tree == b.hall_of_fame[i].tree);
    CHECK(a.hall_of_fame[i].fitness == b.hall_of_fame[i].fitness);
  }
  CHECK(a.history == b.history);
  for (const auto& x : a.hall_of_fame) {
    CHECK(valid(x.tree, missing_ctx()));
    for (const auto& y : a.hall_of_fame) CHECK_FALSE(dominates(x.fitness, y.fitness));
  }
  for (const auto& ind : a.population) CHECK(valid(ind.tree, missing_ctx()));
}

TEST_CASE("config validation") {
  EvolutionConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  cfg.crossover_prob = 0.5;
  CHECK_THROWS(validate(cfg));
  cfg = {};
  cfg.cv_folds = 1;
  CHECK_THROWS(validate(cfg));
  cfg = {};
  cfg.pop_size = 0;
  CHECK_THROWS(validate(cfg));
}

TEST_CASE("separable data with gaps reaches 0.9 in ten generations") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    EvolutionConfig cfg;
    cfg.pop_size = 20;
    cfg.generations = 10;
    cfg.seed = seed;
    EvolutionResult r = evolve(separable_with_gaps(100 + seed), full_grammar(), cfg);
    CAPTURE(seed);
    CHECK(best_pipeline(r.hall_of_fame).fitness.accuracy >= 0.9);
  }
}
