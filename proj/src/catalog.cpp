#include "evoimpute/catalog.hpp"

#include "evoimpute/random.hpp"

namespace evoimpute {

namespace {

TerminalDomain int_range(std::string name, std::int64_t lo, std::int64_t hi) {
  TerminalDomain d{std::move(name), {}};
  for (std::int64_t v = lo; v <= hi; ++v) d.values.emplace_back(v);
  return d;
}

TerminalDomain ints(std::string name, std::initializer_list<std::int64_t> values) {
  TerminalDomain d{std::move(name), {}};
  for (std::int64_t v : values) d.values.emplace_back(v);
  return d;
}

TerminalDomain reals(std::string name, std::initializer_list<double> values) {
  TerminalDomain d{std::move(name), {}};
  for (double v : values) d.values.emplace_back(v);
  return d;
}

TerminalDomain choices(std::string name, std::initializer_list<const char*> values) {
  TerminalDomain d{std::move(name), {}};
  for (const char* v : values) d.values.emplace_back(std::string(v));
  return d;
}

TerminalDomain bools(std::string name, std::initializer_list<bool> values = {true, false}) {
  TerminalDomain d{std::move(name), {}};
  for (bool v : values) d.values.emplace_back(v);
  return d;
}

PrimitiveSpec imputer(std::string_view name, std::vector<TerminalDomain> terms = {}) {
  return {std::string(name), Role::Imputer, MatrixType::RawMatrix, MatrixType::CompleteMatrix, std::move(terms)};
}

PrimitiveSpec transform(std::string_view name, std::vector<TerminalDomain> terms = {}) {
  return {std::string(name), Role::Transform, MatrixType::CompleteMatrix, MatrixType::CompleteMatrix, std::move(terms)};
}

PrimitiveSpec classifier(std::string_view name, std::vector<TerminalDomain> terms = {}) {
  return {std::string(name), Role::Classifier, MatrixType::CompleteMatrix, MatrixType::Classification,
          std::move(terms)};
}

int as_int(const TerminalValue& v) { return static_cast<int>(std::get<std::int64_t>(v)); }
double as_real(const TerminalValue& v) { return std::get<double>(v); }
bool as_bool(const TerminalValue& v) { return std::get<bool>(v); }
const std::string& as_text(const TerminalValue& v) { return std::get<std::string>(v); }

SplitCriterion criterion(const TerminalValue& v) {
  return as_text(v) == "entropy" ? SplitCriterion::Entropy : SplitCriterion::Gini;
}

void check_arity(const OperatorNode& node, std::size_t n) {
  if (node.terminals.size() != n) {
    throw DataError("operator '" + node.primitive + "' expects " + std::to_string(n) + " terminals");
  }
}

ImputerHyper imputer_hyper(const OperatorNode& node, std::uint64_t seed) {
  ImputerHyper h;
  h.seed = seed;
  if (node.primitive == "MICEImputer" || node.primitive == "EMImputer") {
    check_arity(node, 2);
    h.max_iter = as_int(node.terminals[0]);
    h.m = as_int(node.terminals[1]);
  }
  return h;
}

TransformHyper transform_hyper(TransformKind kind, const OperatorNode& node) {
  TransformHyper h;
  switch (kind) {
    case TransformKind::PCA: check_arity(node, 1); h.n_components = as_int(node.terminals[0]); break;
    case TransformKind::VarianceThreshold: check_arity(node, 1); h.threshold = as_real(node.terminals[0]); break;
    case TransformKind::SelectKBest: check_arity(node, 1); h.k = as_int(node.terminals[0]); break;
    default: break;
  }
  return h;
}

ClassifierHyper classifier_hyper(ClassifierKind kind, const OperatorNode& node) {
  const auto& t = node.terminals;
  switch (kind) {
    case ClassifierKind::KNN:
      check_arity(node, 3);
      return KnnHyper{as_int(t[0]), as_int(t[1]), as_text(t[2]) == "distance"};
    case ClassifierKind::GaussianNB: return GaussianNBHyper{};
    case ClassifierKind::MultinomialNB: check_arity(node, 2); return MultinomialNBHyper{as_real(t[0]), as_bool(t[1])};
    case ClassifierKind::DecisionTree:
      check_arity(node, 3);
      return TreeHyper{criterion(t[0]), as_int(t[1]), as_int(t[2]), 1.0};
    case ClassifierKind::RandomForest: {
      check_arity(node, 5);
      ForestHyper h;
      h.n_estimators = as_int(t[0]);
      h.tree = TreeHyper{criterion(t[1]), 0, as_int(t[3]), as_real(t[2])};
      h.bootstrap = as_bool(t[4]);
      return h;
    }
    case ClassifierKind::LogisticRegression: check_arity(node, 1); return LogisticHyper{as_real(t[0])};
    case ClassifierKind::GradientBoosting:
      check_arity(node, 3);
      return BoostingHyper{as_int(t[0]), as_real(t[1]), as_int(t[2])};
  }
  throw DataError("unknown classifier");
}

}  // namespace

Grammar default_grammar(bool with_imputers) {
  std::vector<PrimitiveSpec> p;
  if (with_imputers) {
    p.push_back(imputer("MeanImputer"));
    p.push_back(imputer("MedianImputer"));
    p.push_back(imputer("MFImputer"));
    p.push_back(imputer("MaxImputer"));
    p.push_back(imputer("MICEImputer", {int_range("max_iter", 1, 15), int_range("m", 1, 10)}));
    p.push_back(imputer("EMImputer", {int_range("max_iter", 1, 30), int_range("m", 1, 10)}));
  }
  p.push_back(transform("MaxAbsScaler", {bools("copy", {true})}));
  p.push_back(transform("MinMaxScaler"));
  p.push_back(transform("StandardScaler"));
  p.push_back(transform("PCA", {int_range("n_components", 1, 10)}));
  p.push_back(transform("VarianceThreshold",
                        {reals("threshold", {0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05, 0.1, 0.2})}));
  p.push_back(transform("SelectKBest", {int_range("k", 1, 10)}));

  p.push_back(classifier("KNN", {int_range("n_neighbors", 1, 100), int_range("p", 1, 2),
                                 choices("weights", {"uniform", "distance"})}));
  p.push_back(classifier("GaussianNB"));
  p.push_back(classifier("MultinomialNB", {reals("alpha", {1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0}), bools("fit_prior")}));
  p.push_back(classifier("DecisionTree", {choices("criterion", {"gini", "entropy"}), int_range("max_depth", 1, 10),
                                          int_range("min_samples_split", 2, 20)}));
  p.push_back(classifier("RandomForest", {ints("n_estimators", {10, 50, 100}), choices("criterion", {"gini", "entropy"}),
                                          reals("max_features", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}),
                                          int_range("min_samples_split", 2, 20), bools("bootstrap")}));
  p.push_back(classifier("LogisticRegression", {reals("C", {1e-2, 1e-1, 1.0, 10.0, 100.0})}));
  p.push_back(classifier("GradientBoosting", {ints("n_estimators", {10, 50, 100}),
                                              reals("learning_rate", {0.01, 0.1, 0.5}), int_range("max_depth", 1, 5)}));
  return Grammar(std::move(p));
}

FittedPipeline::FittedPipeline(std::optional<ImputerModel> imputer, std::vector<TransformModel> transforms,
                               ClassifierModel classifier)
    : imputer_(std::move(imputer)), transforms_(std::move(transforms)), classifier_(std::move(classifier)) {}

std::vector<int> FittedPipeline::predict(const DataMatrix& data) const {
  DataMatrix current = imputer_ ? transform(*imputer_, data) : data;
  for (const TransformModel& t : transforms_) current = apply(t, current);
  return classifier_.predict(current);
}

FittedPipeline fit_pipeline(const PipelineTree& tree, const DataMatrix& train, std::uint64_t seed,
                            const FitProbe& probe) {
  if (tree.nodes.empty()) throw DataError("empty pipeline");
  std::optional<ImputerModel> imp;
  std::vector<TransformModel> transforms;
  DataMatrix current = train;

  // leaf-most operator first
  for (std::size_t i = tree.nodes.size(); i-- > 1;) {
    const OperatorNode& node = tree.nodes[i];
    std::uint64_t stage_seed = derive_seed(seed, i);
    if (auto kind = imputer_from_name(node.primitive)) {
      if (i + 1 != tree.nodes.size() || imp) throw DataError("imputer must read input_matrix directly");
      if (probe) probe("imputer", current);
      ImputerFit fit = fit_impute(current, *kind, imputer_hyper(node, stage_seed));
      current = std::move(fit.imputed);
      imp = std::move(fit.model);
    } else if (auto tkind = transform_from_name(node.primitive)) {
      if (probe) probe("transform", current);
      TransformModel model = fit_transform_model(current, *tkind, transform_hyper(*tkind, node));
      current = apply(model, current);
      transforms.push_back(std::move(model));
    } else {
      throw DataError("no implementation for operator '" + node.primitive + "'");
    }
  }
  auto ckind = classifier_from_name(tree.nodes.front().primitive);
  if (!ckind) throw DataError("no implementation for classifier '" + tree.nodes.front().primitive + "'");
  if (probe) probe("classifier", current);
  ClassifierModel model = fit_classifier(current, classifier_hyper(*ckind, tree.nodes.front()), derive_seed(seed, 0));
  return FittedPipeline(std::move(imp), std::move(transforms), std::move(model));
}

}  // namespace evoimpute
