#include "evoimpute/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <numeric>
#include <optional>
#include <thread>

#include "evoimpute/classifiers.hpp"

namespace evoimpute {

bool dominates(const Fitness& a, const Fitness& b) {
  bool no_worse = a.accuracy >= b.accuracy && a.size <= b.size;
  bool better = a.accuracy > b.accuracy || a.size < b.size;
  return no_worse && better;
}

void validate(const EvolutionConfig& cfg) {
  if (cfg.pop_size == 0) throw DataError("population size must be positive");
  if (cfg.crossover_prob < 0 || cfg.mutation_prob < 0 || cfg.crossover_prob + cfg.mutation_prob > 1.0 + 1e-12) {
    throw DataError("crossover and mutation probabilities must be non-negative and sum to at most 1");
  }
  if (cfg.max_pipeline_len == 0) throw DataError("max pipeline length must be positive");
  if (cfg.cv_folds < 2) throw DataError("cross-validation needs at least 2 folds");
  if (cfg.jobs == 0) throw DataError("jobs must be positive");
}

namespace {

const PrimitiveSpec& spec_of(const GpContext& ctx, const OperatorNode& node) { return ctx.grammar->at(node.primitive); }

OperatorNode fresh_node(const PrimitiveSpec& spec, Rng& rng) {
  OperatorNode node{spec.name, {}};
  for (const TerminalDomain& d : spec.terminals) node.terminals.push_back(d.values[uniform_index(rng, d.values.size())]);
  return node;
}

const PrimitiveSpec& pick(const GpContext& ctx, Role role, Rng& rng) {
  const auto& ids = ctx.grammar->of_role(role);
  if (ids.empty()) throw DataError(std::string("grammar has no ") + std::string(role_name(role)) + " primitives");
  return ctx.grammar->primitives()[ids[uniform_index(rng, ids.size())]];
}

std::size_t transform_count(const GpContext& ctx, const PipelineTree& tree) {
  std::size_t n = 0;
  for (const OperatorNode& node : tree.nodes) n += spec_of(ctx, node).role == Role::Transform;
  return n;
}

std::optional<PipelineTree> replace_terminal(const PipelineTree& tree, const GpContext& ctx, Rng& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> slots;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const PrimitiveSpec& s = spec_of(ctx, tree.nodes[i]);
    for (std::size_t t = 0; t < s.terminals.size(); ++t) {
      if (s.terminals[t].values.size() > 1) slots.emplace_back(i, t);
    }
  }
  if (slots.empty()) return std::nullopt;
  auto [i, t] = slots[uniform_index(rng, slots.size())];
  const auto& values = spec_of(ctx, tree.nodes[i]).terminals[t].values;
  PipelineTree out = tree;
  TerminalValue& current = out.nodes[i].terminals[t];
  auto it = std::find(values.begin(), values.end(), current);
  if (it == values.end()) {
    current = values[uniform_index(rng, values.size())];
  } else {
    std::size_t skip = static_cast<std::size_t>(it - values.begin());
    std::size_t k = uniform_index(rng, values.size() - 1);
    current = values[k >= skip ? k + 1 : k];
  }
  return out;
}

std::optional<PipelineTree> replace_operator(const PipelineTree& tree, const GpContext& ctx, Rng& rng) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    if (ctx.grammar->of_role(spec_of(ctx, tree.nodes[i]).role).size() > 1) candidates.push_back(i);
  }
  if (candidates.empty()) return std::nullopt;
  std::size_t i = candidates[uniform_index(rng, candidates.size())];
  const auto& ids = ctx.grammar->of_role(spec_of(ctx, tree.nodes[i]).role);
  std::vector<std::size_t> others;
  for (std::size_t id : ids) {
    if (ctx.grammar->primitives()[id].name != tree.nodes[i].primitive) others.push_back(id);
  }
  PipelineTree out = tree;
  out.nodes[i] = fresh_node(ctx.grammar->primitives()[others[uniform_index(rng, others.size())]], rng);
  return out;
}

std::optional<PipelineTree> insert_or_remove(const PipelineTree& tree, const GpContext& ctx, Rng& rng) {
  std::size_t n_transforms = transform_count(ctx, tree);
  bool can_insert = tree.size() < ctx.max_len && !ctx.grammar->of_role(Role::Transform).empty();
  bool can_remove = n_transforms > 0;
  if (!can_insert && !can_remove) return std::nullopt;
  bool insert = can_insert && (!can_remove || uniform01(rng) < 0.5);
  PipelineTree out = tree;
  if (insert) {
    // transforms occupy positions 1..n_transforms
    std::size_t pos = 1 + uniform_index(rng, n_transforms + 1);
    out.nodes.insert(out.nodes.begin() + static_cast<std::ptrdiff_t>(pos), fresh_node(pick(ctx, Role::Transform, rng), rng));
  } else {
    std::size_t pos = 1 + uniform_index(rng, n_transforms);
    out.nodes.erase(out.nodes.begin() + static_cast<std::ptrdiff_t>(pos));
  }
  return out;
}

std::optional<PipelineTree> apply_mutation(MutationKind kind, const PipelineTree& tree, const GpContext& ctx, Rng& rng) {
  switch (kind) {
    case MutationKind::TerminalReplace: return replace_terminal(tree, ctx, rng);
    case MutationKind::OperatorReplace: return replace_operator(tree, ctx, rng);
    case MutationKind::InsertRemove: return insert_or_remove(tree, ctx, rng);
  }
  return std::nullopt;
}

}  // namespace

PipelineTree random_tree(const GpContext& ctx, Rng& rng) {
  PipelineTree tree;
  tree.nodes.push_back(fresh_node(pick(ctx, Role::Classifier, rng), rng));
  std::size_t upper = ctx.max_len >= 2 ? ctx.max_len - 2 : 0;
  if (ctx.grammar->of_role(Role::Transform).empty()) upper = 0;
  std::size_t n_transforms = uniform_index(rng, upper + 1);
  for (std::size_t i = 0; i < n_transforms; ++i) tree.nodes.push_back(fresh_node(pick(ctx, Role::Transform, rng), rng));
  if (ctx.needs_imputer()) tree.nodes.push_back(fresh_node(pick(ctx, Role::Imputer, rng), rng));
  return tree;
}

std::pair<PipelineTree, PipelineTree> swap_subtrees(const PipelineTree& a, std::size_t i, const PipelineTree& b,
                                                    std::size_t j) {
  PipelineTree x, y;
  x.nodes.assign(a.nodes.begin(), a.nodes.begin() + static_cast<std::ptrdiff_t>(i));
  x.nodes.insert(x.nodes.end(), b.nodes.begin() + static_cast<std::ptrdiff_t>(j), b.nodes.end());
  y.nodes.assign(b.nodes.begin(), b.nodes.begin() + static_cast<std::ptrdiff_t>(j));
  y.nodes.insert(y.nodes.end(), a.nodes.begin() + static_cast<std::ptrdiff_t>(i), a.nodes.end());
  return {std::move(x), std::move(y)};
}

std::pair<PipelineTree, PipelineTree> crossover(const PipelineTree& a, const PipelineTree& b, const GpContext& ctx,
                                                Rng& rng) {
  if (a == b) return {a, b};
  std::vector<std::pair<std::size_t, std::vector<std::size_t>>> options;
  for (std::size_t i = 1; i < a.size(); ++i) {
    Role ra = spec_of(ctx, a.nodes[i]).role;
    std::vector<std::size_t> js;
    for (std::size_t j = 1; j < b.size(); ++j) {
      if (spec_of(ctx, b.nodes[j]).role != ra) continue;
      if (i + (b.size() - j) > ctx.max_len || j + (a.size() - i) > ctx.max_len) continue;
      js.push_back(j);
    }
    if (!js.empty()) options.emplace_back(i, std::move(js));
  }
  if (options.empty()) return {a, b};
  const auto& [i, js] = options[uniform_index(rng, options.size())];
  return swap_subtrees(a, i, b, js[uniform_index(rng, js.size())]);
}

PipelineTree mutate_as(MutationKind kind, const PipelineTree& tree, const GpContext& ctx, Rng& rng) {
  static constexpr MutationKind kAll[] = {MutationKind::TerminalReplace, MutationKind::OperatorReplace,
                                          MutationKind::InsertRemove};
  if (auto out = apply_mutation(kind, tree, ctx, rng)) return *std::move(out);
  for (MutationKind other : kAll) {
    if (other == kind) continue;
    if (auto out = apply_mutation(other, tree, ctx, rng)) return *std::move(out);
  }
  return tree;
}

PipelineTree mutate(const PipelineTree& tree, const GpContext& ctx, Rng& rng) {
  double r = uniform01(rng);
  MutationKind kind = r < 0.6   ? MutationKind::TerminalReplace
                      : r < 0.8 ? MutationKind::OperatorReplace
                                : MutationKind::InsertRemove;
  return mutate_as(kind, tree, ctx, rng);
}

CvPlan make_cv_plan(const DataMatrix& train, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw DataError("cross-validation needs at least 2 folds");
  auto counts = train.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > 0 && counts[c] < folds) {
      throw DataError("class '" + train.class_names()[c] + "' has " + std::to_string(counts[c]) +
                      " training rows, fewer than " + std::to_string(folds) + " folds");
    }
  }
  auto fold_of = stratified_folds(train.labels(), train.n_classes(), folds, seed);
  CvPlan plan;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> fit_rows, val_rows;
    for (std::size_t r = 0; r < train.n_rows(); ++r) (fold_of[r] == f ? val_rows : fit_rows).push_back(r);
    plan.fit.push_back(train.subset(fit_rows));
    plan.validate.push_back(train.subset(val_rows));
  }
  return plan;
}

Individual evaluate(Individual ind, const CvPlan& plan, const GpContext& ctx, std::uint64_t seed,
                    const FitProbe& probe) {
  ind.evaluated = true;
  ind.fitness.size = ind.tree.size();
  ind.fitness.accuracy = 0.0;
  ind.valid = false;
  if (auto err = validation_error(ind.tree, *ctx.grammar, ctx.data_tag, ctx.max_len)) {
    ind.error = *err;
    return ind;
  }
  try {
    double total = 0.0;
    for (std::size_t f = 0; f < plan.fit.size(); ++f) {
      FittedPipeline fitted = fit_pipeline(ind.tree, plan.fit[f], derive_seed(seed, f), probe);
      std::vector<int> pred = fitted.predict(plan.validate[f]);
      total += accuracy(pred, plan.validate[f].labels());
    }
    ind.fitness.accuracy = total / static_cast<double>(plan.fit.size());
    ind.valid = true;
    ind.error.clear();
  } catch (const std::exception& e) {
    ind.error = e.what();
  }
  return ind;
}

std::vector<std::size_t> nondominated_ranks(std::span<const Fitness> fits) {
  std::size_t n = fits.size();
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<std::size_t> count(n, 0), rank(n, 0), current;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      if (dominates(fits[p], fits[q])) {
        dominated[p].push_back(q);
      } else if (dominates(fits[q], fits[p])) {
        ++count[p];
      }
    }
    if (count[p] == 0) current.push_back(p);
  }
  for (std::size_t level = 0; !current.empty(); ++level) {
    std::vector<std::size_t> next;
    for (std::size_t p : current) {
      rank[p] = level;
      for (std::size_t q : dominated[p]) {
        if (--count[q] == 0) next.push_back(q);
      }
    }
    current = std::move(next);
  }
  return rank;
}

std::vector<double> crowding_distances(std::span<const Fitness> fits, std::span<const std::size_t> front) {
  std::size_t m = front.size();
  std::vector<double> dist(m, 0.0);
  if (m == 0) return dist;
  auto objective = [&](int o, std::size_t k) {
    const Fitness& f = fits[front[k]];
    return o == 0 ? f.accuracy : static_cast<double>(f.size);
  };
  std::vector<std::size_t> order(m);
  for (int o = 0; o < 2; ++o) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return objective(o, x) < objective(o, y); });
    double lo = objective(o, order.front()), hi = objective(o, order.back());
    double range = hi - lo;
    // a flat objective carries no spacing information
    if (range <= 0.0) continue;
    dist[order.front()] = std::numeric_limits<double>::infinity();
    dist[order.back()] = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k + 1 < m; ++k) {
      dist[order[k]] += (objective(o, order[k + 1]) - objective(o, order[k - 1])) / range;
    }
  }
  return dist;
}

std::vector<std::size_t> nsga2_select_indices(std::span<const Fitness> fits, std::size_t k) {
  if (k > fits.size()) throw DataError("cannot select " + std::to_string(k) + " of " + std::to_string(fits.size()));
  auto rank = nondominated_ranks(fits);
  std::size_t levels = fits.empty() ? 0 : *std::max_element(rank.begin(), rank.end()) + 1;
  std::vector<std::vector<std::size_t>> fronts(levels);
  for (std::size_t i = 0; i < fits.size(); ++i) fronts[rank[i]].push_back(i);

  auto better = [&](std::size_t a, std::size_t b) {
    if (fits[a].accuracy != fits[b].accuracy) return fits[a].accuracy > fits[b].accuracy;
    if (fits[a].size != fits[b].size) return fits[a].size < fits[b].size;
    return a < b;
  };
  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  for (auto& front : fronts) {
    if (chosen.size() == k) break;
    if (chosen.size() + front.size() <= k) {
      std::sort(front.begin(), front.end(), better);
      chosen.insert(chosen.end(), front.begin(), front.end());
      continue;
    }
    auto dist = crowding_distances(fits, front);
    std::vector<std::size_t> order(front.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      if (dist[x] != dist[y]) return dist[x] > dist[y];
      return better(front[x], front[y]);
    });
    for (std::size_t t = 0; chosen.size() < k; ++t) chosen.push_back(front[order[t]]);
  }
  return chosen;
}

std::vector<Individual> nsga2_select(const std::vector<Individual>& pop, std::size_t k) {
  std::vector<Fitness> fits;
  fits.reserve(pop.size());
  for (const Individual& ind : pop) fits.push_back(ind.fitness);
  std::vector<Individual> out;
  for (std::size_t i : nsga2_select_indices(fits, k)) out.push_back(pop[i]);
  return out;
}

bool HallOfFame::update(const Individual& ind) {
  if (!ind.evaluated || !ind.valid) return false;
  for (const Individual& m : members_) {
    if (dominates(m.fitness, ind.fitness) || m.tree == ind.tree) return false;
  }
  std::erase_if(members_, [&](const Individual& m) { return dominates(ind.fitness, m.fitness); });
  members_.push_back(ind);
  return true;
}

Individual best_pipeline(std::span<const Individual> hof) {
  if (hof.empty()) throw DataError("hall of fame is empty: no valid pipeline was found");
  const Individual* best = &hof[0];
  for (const Individual& ind : hof.subspan(1)) {
    const Fitness &a = ind.fitness, &b = best->fitness;
    if (a.accuracy > b.accuracy || (a.accuracy == b.accuracy && (a.size < b.size || (a.size == b.size && ind.discovery < best->discovery)))) {
      best = &ind;
    }
  }
  return *best;
}

namespace {

void evaluate_all(std::vector<Individual>& inds, const CvPlan& plan, const GpContext& ctx, const EvolutionConfig& cfg,
                  std::size_t generation) {
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < inds.size(); ++i) {
    if (!inds[i].evaluated) todo.push_back(i);
  }
  auto work = [&](std::size_t i) { inds[i] = evaluate(std::move(inds[i]), plan, ctx, derive_seed(cfg.seed, generation, i)); };
  std::size_t workers = std::min(cfg.jobs, todo.size());
  if (workers <= 1) {
    for (std::size_t i : todo) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t t; (t = next.fetch_add(1)) < todo.size();) work(todo[t]);
    });
  }
  for (auto& th : pool) th.join();
}

struct Standing {
  std::vector<std::size_t> rank;
  std::vector<double> crowding;
};

Standing standing_of(const std::vector<Individual>& pop) {
  std::vector<Fitness> fits;
  for (const Individual& ind : pop) fits.push_back(ind.fitness);
  Standing s{nondominated_ranks(fits), std::vector<double>(pop.size(), 0.0)};
  std::size_t levels = *std::max_element(s.rank.begin(), s.rank.end()) + 1;
  for (std::size_t level = 0; level < levels; ++level) {
    std::vector<std::size_t> front;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      if (s.rank[i] == level) front.push_back(i);
    }
    auto d = crowding_distances(fits, front);
    for (std::size_t t = 0; t < front.size(); ++t) s.crowding[front[t]] = d[t];
  }
  return s;
}

std::size_t tournament(const Standing& s, Rng& rng) {
  std::size_t a = uniform_index(rng, s.rank.size());
  std::size_t b = uniform_index(rng, s.rank.size());
  if (s.rank[a] != s.rank[b]) return s.rank[a] < s.rank[b] ? a : b;
  if (s.crowding[a] != s.crowding[b]) return s.crowding[a] > s.crowding[b] ? a : b;
  return std::min(a, b);
}

}  // namespace

EvolutionResult evolve(const DataMatrix& train, const Grammar& grammar, const EvolutionConfig& cfg,
                       const GenerationCallback& on_generation) {
  validate(cfg);
  GpContext ctx{&grammar, cfg.assume_missing ? Completeness::MayContainMissing : train.completeness(),
                cfg.max_pipeline_len};
  if (ctx.needs_imputer() && cfg.max_pipeline_len < 2) {
    throw DataError("data with missing values needs pipelines of at least 2 operators");
  }
  if (grammar.of_role(Role::Classifier).empty()) throw DataError("grammar has no classifier primitives");
  if (ctx.needs_imputer() && grammar.of_role(Role::Imputer).empty()) {
    throw DataError("data has missing values but the grammar has no imputers");
  }

  CvPlan plan = make_cv_plan(train, cfg.cv_folds, derive_seed(cfg.seed, 0xf01d));
  Rng rng(derive_seed(cfg.seed, 0x9e7e));
  EvolutionResult result;
  HallOfFame hof;
  std::uint64_t discovered = 0;

  auto absorb = [&](std::vector<Individual>& batch, std::size_t generation) {
    std::size_t invalid = 0;
    for (Individual& ind : batch) {
      if (ind.discovery == 0) {
        ind.discovery = ++discovered;
        ++result.evaluations;
        invalid += !ind.valid;
      }
      hof.update(ind);
    }
    result.history.push_back(hof.empty() ? 0.0 : best_pipeline(hof.members()).fitness.accuracy);
    if (on_generation) on_generation({generation, result.history.back(), hof.members().size(), invalid});
  };

  std::vector<Individual> pop(cfg.pop_size);
  for (Individual& ind : pop) ind.tree = random_tree(ctx, rng);
  evaluate_all(pop, plan, ctx, cfg, 0);
  absorb(pop, 0);

  for (std::size_t gen = 1; gen <= cfg.generations; ++gen) {
    Standing standing = standing_of(pop);
    std::vector<Individual> offspring(cfg.pop_size);
    for (Individual& child : offspring) {
      double r = uniform01(rng);
      if (r < cfg.crossover_prob) {
        const Individual& p1 = pop[tournament(standing, rng)];
        const Individual& p2 = pop[tournament(standing, rng)];
        child.tree = crossover(p1.tree, p2.tree, ctx, rng).first;
      } else if (r < cfg.crossover_prob + cfg.mutation_prob) {
        child.tree = mutate(pop[tournament(standing, rng)].tree, ctx, rng);
      } else {
        child = pop[tournament(standing, rng)];
      }
    }
    evaluate_all(offspring, plan, ctx, cfg, gen);
    absorb(offspring, gen);
    std::vector<Individual> combined = std::move(pop);
    combined.insert(combined.end(), std::make_move_iterator(offspring.begin()), std::make_move_iterator(offspring.end()));
    pop = nsga2_select(combined, cfg.pop_size);
  }

  result.hall_of_fame = hof.members();
  result.population = std::move(pop);
  return result;
}

}  // namespace evoimpute
