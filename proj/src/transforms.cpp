#include "evoimpute/transforms.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace evoimpute {

namespace {

constexpr std::array<std::pair<TransformKind, std::string_view>, 6> kNames{{
    {TransformKind::MaxAbsScaler, "MaxAbsScaler"},
    {TransformKind::MinMaxScaler, "MinMaxScaler"},
    {TransformKind::StandardScaler, "StandardScaler"},
    {TransformKind::PCA, "PCA"},
    {TransformKind::VarianceThreshold, "VarianceThreshold"},
    {TransformKind::SelectKBest, "SelectKBest"},
}};

struct Moments {
  std::vector<double> min, max, maxabs, mean, var;
};

Moments moments(const DataMatrix& data) {
  const std::size_t p = data.n_cols();
  const auto n = static_cast<double>(data.n_rows());
  Moments m{std::vector<double>(p, std::numeric_limits<double>::infinity()),
            std::vector<double>(p, -std::numeric_limits<double>::infinity()), std::vector<double>(p, 0.0),
            std::vector<double>(p, 0.0), std::vector<double>(p, 0.0)};
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    for (std::size_t c = 0; c < p; ++c) {
      double v = data.value(r, c);
      m.min[c] = std::min(m.min[c], v);
      m.max[c] = std::max(m.max[c], v);
      m.maxabs[c] = std::max(m.maxabs[c], std::abs(v));
      m.mean[c] += v;
    }
  }
  for (double& v : m.mean) v /= n;
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    for (std::size_t c = 0; c < p; ++c) {
      double d = data.value(r, c) - m.mean[c];
      m.var[c] += d * d;
    }
  }
  for (double& v : m.var) v /= n;
  return m;
}

std::vector<std::string> select_names(const DataMatrix& data, const std::vector<std::size_t>& cols) {
  std::vector<std::string> names;
  for (std::size_t c : cols) names.push_back(data.col_names()[c]);
  return names;
}

}  // namespace

std::string_view transform_name(TransformKind kind) {
  for (auto [k, name] : kNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<TransformKind> transform_from_name(std::string_view name) {
  for (auto [k, n] : kNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

std::vector<double> anova_f_scores(const DataMatrix& data) {
  const std::size_t p = data.n_cols();
  const std::size_t k = data.n_classes();
  std::vector<double> scores(p, 0.0);
  std::vector<std::size_t> counts = data.class_counts();
  std::size_t groups = static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }));
  const std::size_t n = data.n_rows();
  if (groups < 2 || n <= groups) return scores;

  for (std::size_t c = 0; c < p; ++c) {
    std::vector<double> sums(k, 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      sums[static_cast<std::size_t>(data.label(r))] += data.value(r, c);
      total += data.value(r, c);
    }
    double grand = total / static_cast<double>(n);
    double ssb = 0.0;
    for (std::size_t g = 0; g < k; ++g) {
      if (!counts[g]) continue;
      double gm = sums[g] / static_cast<double>(counts[g]);
      ssb += static_cast<double>(counts[g]) * (gm - grand) * (gm - grand);
    }
    double ssw = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      auto g = static_cast<std::size_t>(data.label(r));
      double d = data.value(r, c) - sums[g] / static_cast<double>(counts[g]);
      ssw += d * d;
    }
    double between = ssb / static_cast<double>(groups - 1);
    double within = ssw / static_cast<double>(n - groups);
    if (within > 0.0) {
      scores[c] = between / within;
    } else {
      scores[c] = between > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
  }
  return scores;
}

TransformModel fit_transform_model(const DataMatrix& data, TransformKind kind, const TransformHyper& hyper) {
  if (!data.complete()) throw DataError(std::string(transform_name(kind)) + " requires complete data");
  const std::size_t p = data.n_cols();
  TransformModel model;
  model.kind = kind;
  model.n_cols = p;

  switch (kind) {
    case TransformKind::MaxAbsScaler: {
      Moments m = moments(data);
      model.offset.assign(p, 0.0);
      model.scale = m.maxabs;
      for (double& s : model.scale) s = s > 0.0 ? s : 1.0;
      break;
    }
    case TransformKind::MinMaxScaler: {
      Moments m = moments(data);
      model.offset = m.min;
      model.scale.resize(p);
      for (std::size_t c = 0; c < p; ++c) {
        double range = m.max[c] - m.min[c];
        // constant column: leave it as is
        if (range > 0.0) {
          model.scale[c] = range;
        } else {
          model.offset[c] = 0.0;
          model.scale[c] = 1.0;
        }
      }
      break;
    }
    case TransformKind::StandardScaler: {
      Moments m = moments(data);
      model.offset = m.mean;
      model.scale.resize(p);
      for (std::size_t c = 0; c < p; ++c) model.scale[c] = m.var[c] > 0.0 ? std::sqrt(m.var[c]) : 1.0;
      break;
    }
    case TransformKind::PCA: {
      if (hyper.n_components <= 0) throw DataError("PCA: n_components must be positive");
      const auto k = static_cast<Eigen::Index>(
          std::min({static_cast<std::size_t>(hyper.n_components), data.n_rows(), p}));
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
          data.values().data(), static_cast<Eigen::Index>(data.n_rows()), static_cast<Eigen::Index>(p));
      model.pca_mean = x.colwise().mean().transpose();
      Eigen::MatrixXd centered = x.rowwise() - model.pca_mean.transpose();
      Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(data.n_rows());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
      if (es.info() != Eigen::Success) throw DataError("PCA: eigendecomposition failed");
      const auto pp = static_cast<Eigen::Index>(p);
      model.pca_components.resize(k, pp);
      for (Eigen::Index i = 0; i < k; ++i) {
        Eigen::VectorXd v = es.eigenvectors().col(pp - 1 - i);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        model.pca_components.row(i) = v.transpose();
      }
      break;
    }
    case TransformKind::VarianceThreshold: {
      Moments m = moments(data);
      for (std::size_t c = 0; c < p; ++c) {
        if (m.var[c] > hyper.threshold) model.retained.push_back(c);
      }
      if (model.retained.empty()) throw DataError("VarianceThreshold: no column exceeds the threshold");
      break;
    }
    case TransformKind::SelectKBest: {
      if (hyper.k <= 0) throw DataError("SelectKBest: k must be positive");
      std::vector<double> f = anova_f_scores(data);
      for (double& v : f) {
        if (std::isnan(v)) v = 0.0;
      }
      std::vector<std::size_t> order(p);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] > f[b]; });
      order.resize(std::min(p, static_cast<std::size_t>(hyper.k)));
      std::sort(order.begin(), order.end());
      model.retained = std::move(order);
      break;
    }
  }
  return model;
}

DataMatrix apply(const TransformModel& model, const DataMatrix& data) {
  if (data.n_cols() != model.n_cols) {
    throw DataError(std::string(transform_name(model.kind)) + ": fitted on " + std::to_string(model.n_cols) +
                    " columns, got " + std::to_string(data.n_cols()));
  }
  if (!data.complete()) throw DataError(std::string(transform_name(model.kind)) + " requires complete data");
  const std::size_t n = data.n_rows();
  const std::size_t p = data.n_cols();

  switch (model.kind) {
    case TransformKind::MaxAbsScaler:
    case TransformKind::MinMaxScaler:
    case TransformKind::StandardScaler: {
      std::vector<double> values(data.values().begin(), data.values().end());
      for (std::size_t i = 0; i < values.size(); ++i) values[i] = (values[i] - model.offset[i % p]) / model.scale[i % p];
      return data.with_features(p, std::move(values), data.col_names());
    }
    case TransformKind::PCA: {
      const auto k = static_cast<std::size_t>(model.pca_components.rows());
      std::vector<double> values(n * k);
      Eigen::VectorXd dev(static_cast<Eigen::Index>(p));
      for (std::size_t r = 0; r < n; ++r) {
        auto row = data.row(r);
        for (std::size_t c = 0; c < p; ++c) dev(static_cast<Eigen::Index>(c)) = row[c] - model.pca_mean(static_cast<Eigen::Index>(c));
        Eigen::VectorXd proj = model.pca_components * dev;
        for (std::size_t i = 0; i < k; ++i) values[r * k + i] = proj(static_cast<Eigen::Index>(i));
      }
      std::vector<std::string> names;
      for (std::size_t i = 0; i < k; ++i) names.push_back("pc" + std::to_string(i));
      return data.with_features(k, std::move(values), std::move(names));
    }
    case TransformKind::VarianceThreshold:
    case TransformKind::SelectKBest: {
      const std::size_t k = model.retained.size();
      std::vector<double> values(n * k);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < k; ++i) values[r * k + i] = data.value(r, model.retained[i]);
      }
      return data.with_features(k, std::move(values), select_names(data, model.retained));
    }
  }
  throw DataError("unknown transform kind");
}

}  // namespace evoimpute
