#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "evoimpute/data_matrix.hpp"

namespace evoimpute {

enum class TransformKind { MaxAbsScaler, MinMaxScaler, StandardScaler, PCA, VarianceThreshold, SelectKBest };

std::string_view transform_name(TransformKind kind);
std::optional<TransformKind> transform_from_name(std::string_view name);

struct TransformHyper {
  int n_components = 2;     // PCA
  double threshold = 0.0;   // VarianceThreshold
  int k = 10;               // SelectKBest
};

struct TransformModel {
  TransformKind kind = TransformKind::StandardScaler;
  std::size_t n_cols = 0;
  std::vector<double> offset;  // subtracted per column (MinMax: min, Standard: mean)
  std::vector<double> scale;   // divided per column (MaxAbs: max|x|, MinMax: range, Standard: std)
  Eigen::VectorXd pca_mean;
  Eigen::MatrixXd pca_components;  // k × n_cols, orthonormal rows
  std::vector<std::size_t> retained;
};

TransformModel fit_transform_model(const DataMatrix& data, TransformKind kind, const TransformHyper& hyper = {});
DataMatrix apply(const TransformModel& model, const DataMatrix& data);

/// One-way ANOVA F statistic of every column against the labels.
std::vector<double> anova_f_scores(const DataMatrix& data);

}  // namespace evoimpute
