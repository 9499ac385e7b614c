#include "evoimpute/imputers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>

#include "evoimpute/random.hpp"

namespace evoimpute {

namespace {

constexpr std::array<std::pair<ImputerKind, std::string_view>, 6> kNames{{
    {ImputerKind::Mean, "MeanImputer"},
    {ImputerKind::Median, "MedianImputer"},
    {ImputerKind::MostFrequent, "MFImputer"},
    {ImputerKind::Max, "MaxImputer"},
    {ImputerKind::MICE, "MICEImputer"},
    {ImputerKind::EM, "EMImputer"},
}};

void check_hyper(const ImputerHyper& h) {
  if (h.m < 1) throw DataError("imputer: m must be >= 1");
  if (h.max_iter < 0) throw DataError("imputer: max_iter must be >= 0");
  if (!(h.tol > 0.0)) throw DataError("imputer: tol must be positive");
  if (!(h.ridge > 0.0)) throw DataError("imputer: ridge must be positive");
}

std::vector<double> column_means(const DataMatrix& data) {
  std::vector<double> means(data.n_cols());
  for (std::size_t c = 0; c < data.n_cols(); ++c) means[c] = column_stats(data, c).mean;
  return means;
}

Eigen::MatrixXd mean_filled(const DataMatrix& data, const std::vector<double>& fill) {
  Eigen::MatrixXd x(data.n_rows(), data.n_cols());
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    for (std::size_t c = 0; c < data.n_cols(); ++c) {
      double v = data.value(r, c);
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = is_missing(v) ? fill[c] : v;
    }
  }
  return x;
}

DataMatrix to_matrix(const DataMatrix& like, const Eigen::MatrixXd& x) {
  std::vector<double> values(static_cast<std::size_t>(x.size()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) values[static_cast<std::size_t>(r * x.cols() + c)] = x(r, c);
  }
  return like.with_features(like.n_cols(), std::move(values), like.col_names());
}

// ---------------------------------------------------------------- MICE

struct RegressionFit {
  ColumnRegression model;
  double residual_sd = 0.0;
};

RegressionFit fit_column(const Eigen::MatrixXd& x, Eigen::Index target, const std::vector<Eigen::Index>& rows,
                         double ridge) {
  const Eigen::Index p = x.cols();
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd z(n, p - 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index r = rows[static_cast<std::size_t>(i)];
    y(i) = x(r, target);
    for (Eigen::Index c = 0, k = 0; c < p; ++c) {
      if (c != target) z(i, k++) = x(r, c);
    }
  }
  Eigen::RowVectorXd z_mean = z.colwise().mean();
  double y_mean = y.mean();
  z.rowwise() -= z_mean;
  y.array() -= y_mean;

  Eigen::MatrixXd gram = z.transpose() * z;
  gram.diagonal().array() += ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw DataError("MICE: singular regression design");
  Eigen::VectorXd beta = llt.solve(z.transpose() * y);

  RegressionFit fit;
  fit.model.coef = Eigen::VectorXd::Zero(p);
  for (Eigen::Index c = 0, k = 0; c < p; ++c) {
    if (c != target) fit.model.coef(c) = beta(k++);
  }
  fit.model.intercept = y_mean - z_mean.dot(beta);
  double rss = (y - z * beta).squaredNorm();
  double dof = std::max<double>(1.0, static_cast<double>(n - (p - 1) - 1));
  fit.residual_sd = std::sqrt(rss / dof);
  return fit;
}

double predict_column(const ColumnRegression& m, const Eigen::MatrixXd& x, Eigen::Index row) {
  return m.intercept + x.row(row).dot(m.coef);
}

struct ChainResult {
  Eigen::MatrixXd filled;
  std::vector<ColumnRegression> models;
  int sweeps = 0;
};

ChainResult run_chain(const DataMatrix& data, const std::vector<double>& means, const ImputerHyper& hyper,
                      std::uint64_t seed, bool keep_models) {
  const auto p = static_cast<Eigen::Index>(data.n_cols());
  ChainResult out;
  out.filled = mean_filled(data, means);
  out.models.resize(static_cast<std::size_t>(p));

  std::vector<std::vector<Eigen::Index>> observed(static_cast<std::size_t>(p));
  std::vector<std::vector<Eigen::Index>> absent(static_cast<std::size_t>(p));
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    for (std::size_t c = 0; c < data.n_cols(); ++c) {
      (data.missing(r, c) ? absent : observed)[c].push_back(static_cast<Eigen::Index>(r));
    }
  }

  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int sweep = 0; sweep < hyper.max_iter; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto& miss = absent[static_cast<std::size_t>(j)];
      if (miss.empty()) continue;
      RegressionFit fit = fit_column(out.filled, j, observed[static_cast<std::size_t>(j)], hyper.ridge);
      for (Eigen::Index r : miss) {
        double v = predict_column(fit.model, out.filled, r) + fit.residual_sd * noise(rng);
        max_change = std::max(max_change, std::abs(v - out.filled(r, j)));
        out.filled(r, j) = v;
      }
      out.models[static_cast<std::size_t>(j)] = std::move(fit.model);
    }
    out.sweeps = sweep + 1;
    if (max_change < hyper.tol) break;
  }

  if (keep_models && out.sweeps > 0) {
    for (Eigen::Index j = 0; j < p; ++j) {
      if (absent[static_cast<std::size_t>(j)].empty()) {
        out.models[static_cast<std::size_t>(j)] =
            fit_column(out.filled, j, observed[static_cast<std::size_t>(j)], hyper.ridge).model;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- EM

// Conditional structure of one missingness pattern under N(mu, sigma).
struct PatternModel {
  std::vector<Eigen::Index> obs;
  std::vector<Eigen::Index> mis;
  Eigen::MatrixXd gain;      // sigma_mo * inv(sigma_oo)
  Eigen::MatrixXd cond_cov;  // sigma_mm - gain * sigma_om
  Eigen::LLT<Eigen::MatrixXd> oo_chol;
  double oo_logdet = 0.0;
};

std::vector<char> pattern_of(const DataMatrix& data, std::size_t r) {
  std::vector<char> pat(data.n_cols());
  for (std::size_t c = 0; c < data.n_cols(); ++c) pat[c] = data.missing(r, c) ? 1 : 0;
  return pat;
}

PatternModel build_pattern(const std::vector<char>& pat, const Eigen::MatrixXd& sigma) {
  PatternModel pm;
  for (std::size_t c = 0; c < pat.size(); ++c) (pat[c] ? pm.mis : pm.obs).push_back(static_cast<Eigen::Index>(c));
  const auto no = static_cast<Eigen::Index>(pm.obs.size());
  const auto nm = static_cast<Eigen::Index>(pm.mis.size());
  Eigen::MatrixXd s_oo(no, no), s_mo(nm, no), s_mm(nm, nm);
  for (Eigen::Index a = 0; a < no; ++a) {
    for (Eigen::Index b = 0; b < no; ++b) s_oo(a, b) = sigma(pm.obs[a], pm.obs[b]);
  }
  for (Eigen::Index a = 0; a < nm; ++a) {
    for (Eigen::Index b = 0; b < no; ++b) s_mo(a, b) = sigma(pm.mis[a], pm.obs[b]);
    for (Eigen::Index b = 0; b < nm; ++b) s_mm(a, b) = sigma(pm.mis[a], pm.mis[b]);
  }
  if (no > 0) {
    pm.oo_chol.compute(s_oo);
    if (pm.oo_chol.info() != Eigen::Success) throw DataError("EM: covariance is not positive definite");
    Eigen::MatrixXd l = pm.oo_chol.matrixL();
    pm.oo_logdet = 2.0 * l.diagonal().array().log().sum();
    pm.gain = pm.oo_chol.solve(s_mo.transpose()).transpose();
    pm.cond_cov = s_mm - pm.gain * s_mo.transpose();
  } else {
    pm.gain = Eigen::MatrixXd(nm, 0);
    pm.cond_cov = s_mm;
  }
  return pm;
}

class PatternCache {
 public:
  explicit PatternCache(const Eigen::MatrixXd& sigma) : sigma_(sigma) {}
  const PatternModel& get(const std::vector<char>& pat) {
    auto it = cache_.find(pat);
    if (it == cache_.end()) it = cache_.emplace(pat, build_pattern(pat, sigma_)).first;
    return it->second;
  }

 private:
  const Eigen::MatrixXd& sigma_;
  std::map<std::vector<char>, PatternModel> cache_;
};

Eigen::VectorXd conditional_mean(const PatternModel& pm, const Eigen::VectorXd& mu, std::span<const double> row) {
  Eigen::VectorXd dev(static_cast<Eigen::Index>(pm.obs.size()));
  for (std::size_t a = 0; a < pm.obs.size(); ++a) {
    dev(static_cast<Eigen::Index>(a)) = row[static_cast<std::size_t>(pm.obs[a])] - mu(pm.obs[a]);
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(pm.mis.size()));
  for (std::size_t a = 0; a < pm.mis.size(); ++a) out(static_cast<Eigen::Index>(a)) = mu(pm.mis[a]);
  if (!pm.obs.empty()) out += pm.gain * dev;
  return out;
}

Eigen::MatrixXd covariance_mle(const Eigen::MatrixXd& x, const Eigen::VectorXd& mu) {
  Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
  return centered.transpose() * centered / static_cast<double>(x.rows());
}

Eigen::MatrixXd psd_root(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

void check_columns(const ImputerModel& model, const DataMatrix& data) {
  if (data.n_cols() != model.n_cols) {
    throw DataError("imputer fitted on " + std::to_string(model.n_cols) + " columns, got " +
                    std::to_string(data.n_cols()));
  }
}

}  // namespace

std::string_view imputer_name(ImputerKind kind) {
  for (auto [k, name] : kNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<ImputerKind> imputer_from_name(std::string_view name) {
  for (auto [k, n] : kNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

ImputerModel fit_simple(const DataMatrix& data, ImputerKind kind) {
  ImputerModel model;
  model.kind = kind;
  model.n_cols = data.n_cols();
  model.per_column_fill.resize(data.n_cols());
  for (std::size_t c = 0; c < data.n_cols(); ++c) {
    ColumnStats s = column_stats(data, c);
    switch (kind) {
      case ImputerKind::Mean: model.per_column_fill[c] = s.mean; break;
      case ImputerKind::Median: model.per_column_fill[c] = s.median; break;
      case ImputerKind::MostFrequent: model.per_column_fill[c] = s.mode; break;
      case ImputerKind::Max: model.per_column_fill[c] = s.max; break;
      default: throw DataError("fit_simple: not a simple imputer kind");
    }
  }
  return model;
}

ImputerFit fit_mice_impute(const DataMatrix& data, const ImputerHyper& hyper) {
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(std::max(hyper.m, 1)));
  for (std::size_t c = 0; c < seeds.size(); ++c) seeds[c] = derive_seed(hyper.seed, c);
  return fit_mice_impute(data, hyper, seeds);
}

ImputerFit fit_mice_impute(const DataMatrix& data, const ImputerHyper& hyper,
                           std::span<const std::uint64_t> chain_seeds) {
  check_hyper(hyper);
  if (chain_seeds.empty()) throw DataError("MICE: need at least one chain");
  if (data.n_cols() < 2) throw DataError("MICE: needs at least two columns");

  ImputerModel model;
  model.kind = ImputerKind::MICE;
  model.hyper = hyper;
  model.hyper.m = static_cast<int>(chain_seeds.size());
  model.n_cols = data.n_cols();
  model.per_column_fill = column_means(data);

  Eigen::MatrixXd pooled;
  for (std::size_t c = 0; c < chain_seeds.size(); ++c) {
    ChainResult chain = run_chain(data, model.per_column_fill, hyper, chain_seeds[c], c == 0);
    if (c == 0) {
      pooled = chain.filled;
      model.mice_models = std::move(chain.models);
      model.mice_sweeps = chain.sweeps;
    } else {
      pooled += chain.filled;
    }
  }
  pooled /= static_cast<double>(chain_seeds.size());
  // observed cells are identical across chains; restore them bit-exactly
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    for (std::size_t c = 0; c < data.n_cols(); ++c) {
      if (!data.missing(r, c)) pooled(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = data.value(r, c);
    }
  }
  return ImputerFit{std::move(model), to_matrix(data, pooled)};
}

ImputerModel fit_mice(const DataMatrix& data, const ImputerHyper& hyper) {
  return fit_mice_impute(data, hyper).model;
}

double observed_log_likelihood(const DataMatrix& data, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma) {
  PatternCache cache(sigma);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    const PatternModel& pm = cache.get(pattern_of(data, r));
    if (pm.obs.empty()) continue;
    Eigen::VectorXd dev(static_cast<Eigen::Index>(pm.obs.size()));
    for (std::size_t a = 0; a < pm.obs.size(); ++a) {
      dev(static_cast<Eigen::Index>(a)) = data.value(r, static_cast<std::size_t>(pm.obs[a])) - mu(pm.obs[a]);
    }
    double quad = dev.dot(pm.oo_chol.solve(dev));
    total += -0.5 * (static_cast<double>(pm.obs.size()) * log2pi + pm.oo_logdet + quad);
  }
  return total;
}

ImputerModel fit_em(const DataMatrix& data, const ImputerHyper& hyper) {
  check_hyper(hyper);
  const auto n = static_cast<Eigen::Index>(data.n_rows());
  const auto p = static_cast<Eigen::Index>(data.n_cols());

  ImputerModel model;
  model.kind = ImputerKind::EM;
  model.hyper = hyper;
  model.n_cols = data.n_cols();
  model.underdetermined = data.n_rows() <= data.n_cols();

  std::vector<double> means = column_means(data);
  Eigen::MatrixXd x0 = mean_filled(data, means);
  Eigen::VectorXd mu = x0.colwise().mean().transpose();
  Eigen::MatrixXd sigma = covariance_mle(x0, mu);
  sigma.diagonal().array() += hyper.ridge;

  for (int iter = 0; iter < hyper.max_iter; ++iter) {
    model.em_trace.log_likelihood.push_back(observed_log_likelihood(data, mu, sigma));
    PatternCache cache(sigma);
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd xhat(p);
    for (Eigen::Index r = 0; r < n; ++r) {
      auto row = data.row(static_cast<std::size_t>(r));
      for (Eigen::Index c = 0; c < p; ++c) xhat(c) = row[static_cast<std::size_t>(c)];
      std::vector<char> pat = pattern_of(data, static_cast<std::size_t>(r));
      bool any_missing = std::find(pat.begin(), pat.end(), 1) != pat.end();
      if (any_missing) {
        const PatternModel& pm = cache.get(pat);
        Eigen::VectorXd cm = conditional_mean(pm, mu, row);
        for (std::size_t a = 0; a < pm.mis.size(); ++a) xhat(pm.mis[a]) = cm(static_cast<Eigen::Index>(a));
        for (std::size_t a = 0; a < pm.mis.size(); ++a) {
          for (std::size_t b = 0; b < pm.mis.size(); ++b) {
            s2(pm.mis[a], pm.mis[b]) += pm.cond_cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
          }
        }
      }
      s1 += xhat;
      s2.noalias() += xhat * xhat.transpose();
    }
    Eigen::VectorXd mu_next = s1 / static_cast<double>(n);
    Eigen::MatrixXd sigma_next = s2 / static_cast<double>(n) - mu_next * mu_next.transpose();
    sigma_next = 0.5 * (sigma_next + sigma_next.transpose());
    sigma_next.diagonal().array() += hyper.ridge;
    if (Eigen::LLT<Eigen::MatrixXd>(sigma_next).info() != Eigen::Success) {
      throw DataError("EM: covariance update is not positive definite");
    }
    double change = std::max((mu_next - mu).cwiseAbs().maxCoeff(), (sigma_next - sigma).cwiseAbs().maxCoeff());
    mu = std::move(mu_next);
    sigma = std::move(sigma_next);
    model.em_trace.iterations = iter + 1;
    if (change < hyper.tol) {
      model.em_trace.converged = true;
      break;
    }
  }
  model.em_trace.log_likelihood.push_back(observed_log_likelihood(data, mu, sigma));
  model.mu = std::move(mu);
  model.sigma = std::move(sigma);
  return model;
}

ImputerModel fit_imputer(const DataMatrix& data, ImputerKind kind, const ImputerHyper& hyper) {
  switch (kind) {
    case ImputerKind::MICE: return fit_mice(data, hyper);
    case ImputerKind::EM: return fit_em(data, hyper);
    default: return fit_simple(data, kind);
  }
}

ImputerFit fit_impute(const DataMatrix& data, ImputerKind kind, const ImputerHyper& hyper) {
  if (kind == ImputerKind::MICE) return fit_mice_impute(data, hyper);
  ImputerModel model = fit_imputer(data, kind, hyper);
  DataMatrix imputed = transform(model, data);
  return ImputerFit{std::move(model), std::move(imputed)};
}

DataMatrix transform(const ImputerModel& model, const DataMatrix& data) {
  check_columns(model, data);
  if (data.complete()) return data;
  const std::size_t p = data.n_cols();
  std::vector<double> values(data.values().begin(), data.values().end());

  switch (model.kind) {
    case ImputerKind::Mean:
    case ImputerKind::Median:
    case ImputerKind::MostFrequent:
    case ImputerKind::Max:
      for (std::size_t i = 0; i < values.size(); ++i) {
        if (is_missing(values[i])) values[i] = model.per_column_fill[i % p];
      }
      break;

    case ImputerKind::MICE: {
      Eigen::MatrixXd x = mean_filled(data, model.per_column_fill);
      if (model.mice_sweeps > 0) {
        for (std::size_t j = 0; j < p; ++j) {
          for (std::size_t r = 0; r < data.n_rows(); ++r) {
            if (!data.missing(r, j)) continue;
            auto ri = static_cast<Eigen::Index>(r);
            x(ri, static_cast<Eigen::Index>(j)) = predict_column(model.mice_models[j], x, ri);
          }
        }
      }
      for (std::size_t i = 0; i < values.size(); ++i) {
        if (is_missing(values[i])) values[i] = x(static_cast<Eigen::Index>(i / p), static_cast<Eigen::Index>(i % p));
      }
      break;
    }

    case ImputerKind::EM: {
      PatternCache cache(model.sigma);
      Rng rng(model.hyper.seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      const int draws = std::max(model.hyper.m, 1);
      for (std::size_t r = 0; r < data.n_rows(); ++r) {
        std::vector<char> pat = pattern_of(data, r);
        if (std::find(pat.begin(), pat.end(), 1) == pat.end()) continue;
        const PatternModel& pm = cache.get(pat);
        Eigen::VectorXd fill = conditional_mean(pm, model.mu, data.row(r));
        if (draws > 1) {
          Eigen::MatrixXd root = psd_root(pm.cond_cov);
          Eigen::VectorXd pooled = Eigen::VectorXd::Zero(fill.size());
          Eigen::VectorXd z(fill.size());
          for (int d = 0; d < draws; ++d) {
            for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = normal(rng);
            pooled += fill + root * z;
          }
          fill = pooled / static_cast<double>(draws);
        }
        for (std::size_t a = 0; a < pm.mis.size(); ++a) {
          values[r * p + static_cast<std::size_t>(pm.mis[a])] = fill(static_cast<Eigen::Index>(a));
        }
      }
      break;
    }
  }
  return data.with_features(p, std::move(values), data.col_names());
}

}  // namespace evoimpute
