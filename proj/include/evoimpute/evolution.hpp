#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evoimpute/catalog.hpp"
#include "evoimpute/pipeline.hpp"
#include "evoimpute/random.hpp"

namespace evoimpute {

/// Maximize accuracy, minimize size.
struct Fitness {
  double accuracy = 0.0;
  std::size_t size = 0;

  friend bool operator==(const Fitness&, const Fitness&) = default;
};

bool dominates(const Fitness& a, const Fitness& b);

struct Individual {
  PipelineTree tree;
  Fitness fitness;
  bool valid = false;
  bool evaluated = false;
  std::string error;            // why the pipeline was invalid, if it was
  std::uint64_t discovery = 0;  // evaluation order within a run
};

struct EvolutionConfig {
  std::size_t pop_size = 100;
  std::size_t generations = 50;
  double crossover_prob = 0.1;
  double mutation_prob = 0.9;
  std::size_t max_pipeline_len = 4;
  std::uint64_t seed = 0;
  std::size_t cv_folds = 3;
  std::size_t jobs = 1;
  bool assume_missing = false;  // require an imputer even if the training data is complete
};

void validate(const EvolutionConfig& cfg);

/// What the genetic operators need to keep trees well-formed.
struct GpContext {
  const Grammar* grammar = nullptr;
  Completeness data_tag = Completeness::MayContainMissing;
  std::size_t max_len = 4;

  bool needs_imputer() const { return data_tag == Completeness::MayContainMissing; }
};

PipelineTree random_tree(const GpContext& ctx, Rng& rng);

/// Swaps the subtrees rooted at nodes[i] of `a` and nodes[j] of `b`.
/// No compatibility check; see crossover().
std::pair<PipelineTree, PipelineTree> swap_subtrees(const PipelineTree& a, std::size_t i, const PipelineTree& b,
                                                    std::size_t j);

/// One-point crossover between same-role nodes below the root. Identical
/// parents, or parents without a compatible pair, come back unchanged.
std::pair<PipelineTree, PipelineTree> crossover(const PipelineTree& a, const PipelineTree& b, const GpContext& ctx,
                                                Rng& rng);

enum class MutationKind { TerminalReplace, OperatorReplace, InsertRemove };

/// Picks a mutation kind (0.6 / 0.2 / 0.2) and applies it, falling back to
/// the other kinds when the chosen one has nothing to act on.
PipelineTree mutate(const PipelineTree& tree, const GpContext& ctx, Rng& rng);
PipelineTree mutate_as(MutationKind kind, const PipelineTree& tree, const GpContext& ctx, Rng& rng);

/// Precomputed stratified folds over a training matrix.
struct CvPlan {
  std::vector<DataMatrix> fit;
  std::vector<DataMatrix> validate;
};

CvPlan make_cv_plan(const DataMatrix& train, std::size_t folds, std::uint64_t seed);

/// Mean fold accuracy. Never throws for pipeline failures: those mark the
/// individual invalid with accuracy 0.
Individual evaluate(Individual ind, const CvPlan& plan, const GpContext& ctx, std::uint64_t seed,
                    const FitProbe& probe = {});

/// Front index per point, 0 = non-dominated.
std::vector<std::size_t> nondominated_ranks(std::span<const Fitness> fits);

/// Crowding distance of each member of `front` (indices into fits), in the
/// same order as `front`.
std::vector<double> crowding_distances(std::span<const Fitness> fits, std::span<const std::size_t> front);

/// Survivor selection: k indices into fits, front by front.
std::vector<std::size_t> nsga2_select_indices(std::span<const Fitness> fits, std::size_t k);
std::vector<Individual> nsga2_select(const std::vector<Individual>& pop, std::size_t k);

/// All-time non-dominated archive of valid individuals.
class HallOfFame {
 public:
  /// Returns true when `ind` entered the archive.
  bool update(const Individual& ind);
  const std::vector<Individual>& members() const { return members_; }
  bool empty() const { return members_.empty(); }

 private:
  std::vector<Individual> members_;
};

Individual best_pipeline(std::span<const Individual> hof);

struct GenerationStats {
  std::size_t generation = 0;
  double best_accuracy = 0.0;
  std::size_t front_size = 0;
  std::size_t invalid = 0;
};

struct EvolutionResult {
  std::vector<Individual> hall_of_fame;
  std::vector<double> history;  // best hall-of-fame accuracy, one entry per generation incl. the initial one
  std::vector<Individual> population;
  std::size_t evaluations = 0;
};

using GenerationCallback = std::function<void(const GenerationStats&)>;

EvolutionResult evolve(const DataMatrix& train, const Grammar& grammar, const EvolutionConfig& cfg,
                       const GenerationCallback& on_generation = {});

}  // namespace evoimpute
