#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "evoimpute/classifiers.hpp"
#include "evoimpute/imputers.hpp"
#include "evoimpute/pipeline.hpp"
#include "evoimpute/transforms.hpp"

namespace evoimpute {

/// Every operator this library implements, with its hyperparameter domains.
/// `with_imputers = false` yields the grammar for complete-data searches.
Grammar default_grammar(bool with_imputers = true);

/// Observes each fit: called with the stage name ("imputer", "transform",
/// "classifier") and the matrix that stage is fitted on.
using FitProbe = std::function<void(std::string_view stage, const DataMatrix& fitted_on)>;

class FittedPipeline {
 public:
  FittedPipeline(std::optional<ImputerModel> imputer, std::vector<TransformModel> transforms,
                 ClassifierModel classifier);

  std::vector<int> predict(const DataMatrix& data) const;

 private:
  std::optional<ImputerModel> imputer_;
  std::vector<TransformModel> transforms_;
  ClassifierModel classifier_;
};

/// Fits imputer, transforms and classifier bottom-up on `train`. Operators
/// must be ones default_grammar() declares; the pipeline seed drives every
/// stochastic component.
FittedPipeline fit_pipeline(const PipelineTree& tree, const DataMatrix& train, std::uint64_t seed,
                            const FitProbe& probe = {});

}  // namespace evoimpute
