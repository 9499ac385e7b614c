#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "evoimpute/data_matrix.hpp"

namespace evoimpute {

enum class ImputerKind { Mean, Median, MostFrequent, Max, MICE, EM };

std::string_view imputer_name(ImputerKind kind);
std::optional<ImputerKind> imputer_from_name(std::string_view name);

struct ImputerHyper {
  int m = 5;           // multiple-imputation repetitions
  int max_iter = 10;   // chained-equation sweeps / EM iterations
  double tol = 1e-3;
  double ridge = 1e-3;
  std::uint64_t seed = 0;
};

/// Linear model for one column given all the others (`coef` has n_cols
/// entries; the entry of the target column itself is unused and zero).
struct ColumnRegression {
  Eigen::VectorXd coef;
  double intercept = 0.0;
};

struct EmTrace {
  std::vector<double> log_likelihood;  // observed-data log-likelihood at the start of each iteration, plus final
  int iterations = 0;
  bool converged = false;
};

struct ImputerModel {
  ImputerKind kind = ImputerKind::Mean;
  ImputerHyper hyper;
  std::size_t n_cols = 0;
  /// Simple kinds: the fill value. MICE: the initial mean fill.
  std::vector<double> per_column_fill;
  std::vector<ColumnRegression> mice_models;
  int mice_sweeps = 0;
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  EmTrace em_trace;
  /// EM was fitted with n_rows <= n_cols; estimates lean on the ridge term.
  bool underdetermined = false;
};

/// A fitted model together with the imputed version of the data it was fitted on.
struct ImputerFit {
  ImputerModel model;
  DataMatrix imputed;
};

ImputerModel fit_simple(const DataMatrix& data, ImputerKind kind);

/// Chained equations: mean fill, then up to `max_iter` sweeps of per-column
/// ridge regressions (ascending column order), repeated over one chain per
/// seed and pooled by cell-wise mean. Chains differ through Gaussian
/// residual noise added to each re-imputed cell.
ImputerFit fit_mice_impute(const DataMatrix& data, const ImputerHyper& hyper);
ImputerFit fit_mice_impute(const DataMatrix& data, const ImputerHyper& hyper,
                           std::span<const std::uint64_t> chain_seeds);
ImputerModel fit_mice(const DataMatrix& data, const ImputerHyper& hyper);

/// EM for a multivariate normal with missing coordinates.
ImputerModel fit_em(const DataMatrix& data, const ImputerHyper& hyper);

/// Observed-data log-likelihood of `data` under N(mu, sigma).
double observed_log_likelihood(const DataMatrix& data, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma);

ImputerModel fit_imputer(const DataMatrix& data, ImputerKind kind, const ImputerHyper& hyper = {});

/// Fits and returns the imputed training matrix. For MICE this is the pooled
/// chained result rather than a transform-time sweep.
ImputerFit fit_impute(const DataMatrix& data, ImputerKind kind, const ImputerHyper& hyper = {});

DataMatrix transform(const ImputerModel& model, const DataMatrix& data);

}  // namespace evoimpute
