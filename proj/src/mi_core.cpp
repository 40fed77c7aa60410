#include "ragmi/mi_core.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "ragmi/error.hpp"
#include "ragmi/kernels.hpp"
#include "ragmi/parallel.hpp"
#include "ragmi/random.hpp"

namespace ragmi {

namespace {

const double kTwoPiE = 2.0 * std::numbers::pi * std::numbers::e;

double gaussian_entropy(double var) { return 0.5 * std::log(kTwoPiE * var); }

double binary_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  return h;
}

void check_inputs(const std::vector<std::vector<double>>& columns, const std::vector<double>& y) {
  const std::size_t n = y.size();
  if (n < 10) throw EstimatorError("mi: need at least 10 samples, got " + std::to_string(n));
  if (n < columns.size() + 2)
    throw EstimatorError("mi: " + std::to_string(n) + " samples is too few for " +
                         std::to_string(columns.size()) + " columns");
  for (const auto& c : columns)
    if (c.size() != n) throw ArgumentError("mi: column length does not match target length");
  for (double v : y)
    if (!std::isfinite(v)) throw EstimatorError("mi: non-finite target value");
}

}  // namespace

std::string estimator_name(EstimatorKind kind) {
  return kind == EstimatorKind::Gaussian ? "gaussian" : "regression";
}

EstimatorKind parse_estimator(const std::string& text) {
  if (text == "gaussian") return EstimatorKind::Gaussian;
  if (text == "regression") return EstimatorKind::Regression;
  throw ConfigError("unknown estimator '" + text + "' (expected gaussian or regression)");
}

void EstimatorConfig::validate() const {
  if (folds < 2) throw ConfigError("estimator: folds must be >= 2");
  if (!(variance_floor > 0.0)) throw ConfigError("estimator: variance_floor must be > 0");
  regressor.validate();
}

double entropy_marginal(const std::vector<double>& y, double variance_floor, bool* degenerate) {
  if (y.size() < 10) throw EstimatorError("entropy_marginal: need at least 10 samples");
  for (double v : y)
    if (!std::isfinite(v)) throw EstimatorError("entropy_marginal: non-finite value");
  const double var = kernels::variance(y);
  const bool floored = !(var > variance_floor);
  if (degenerate) *degenerate = floored;
  return gaussian_entropy(floored ? variance_floor : var);
}

double entropy_binary(const std::vector<double>& y) {
  if (y.empty()) throw EstimatorError("entropy_binary: empty input");
  double ones = 0.0;
  for (double v : y) {
    if (v != 0.0 && v != 1.0) throw EstimatorError("entropy_binary: values must be 0 or 1");
    ones += v;
  }
  return binary_entropy(ones / static_cast<double>(y.size()));
}

MiEstimate mi_gaussian(const std::vector<std::vector<double>>& columns, const std::vector<double>& y,
                       double variance_floor) {
  check_inputs(columns, y);
  const std::size_t n = y.size(), d = columns.size();
  MiEstimate out;
  out.estimator = EstimatorKind::Gaussian;
  out.n_samples = n;

  const double syy = kernels::variance(y);
  const double syy_f = std::max(syy, variance_floor);
  double cond = syy;
  if (d > 0) {
    // Standardized columns make the estimate depend only on correlations.
    Eigen::MatrixXd x(n, d);
    for (std::size_t c = 0; c < d; ++c) {
      const double mu = kernels::mean(columns[c]);
      const double sd = std::sqrt(kernels::variance(columns[c]));
      for (std::size_t r = 0; r < n; ++r) x(r, c) = sd > 0.0 ? (columns[c][r] - mu) / sd : 0.0;
    }
    const double my = kernels::mean(y);
    Eigen::VectorXd yc(n);
    for (std::size_t r = 0; r < n; ++r) yc(r) = y[r] - my;
    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::MatrixXd sxx = (x.transpose() * x) * inv_n;
    sxx.diagonal().array() += 1e-9;
    const Eigen::VectorXd sxy = (x.transpose() * yc) * inv_n;
    const Eigen::VectorXd beta = sxx.ldlt().solve(sxy);
    cond = syy - sxy.dot(beta);
  }
  const double cond_f = std::max(cond, variance_floor);
  out.degenerate = !(syy > variance_floor) || !(cond > variance_floor);
  out.raw = 0.5 * std::log(syy_f / cond_f);
  out.value = std::max(out.raw, 0.0);
  out.detail["det_sigma_yy"] = syy;
  out.detail["det_sigma_y_given_x"] = cond;
  return out;
}

MiEstimate mi_regression(const std::vector<std::vector<double>>& columns,
                         const std::vector<double>& y, const EstimatorConfig& cfg) {
  cfg.validate();
  check_inputs(columns, y);
  const std::size_t n = y.size();
  const auto folds = static_cast<std::size_t>(cfg.folds);
  if (n < folds * 2) throw EstimatorError("mi_regression: too few samples for the fold count");
  const bool binary = cfg.target == TargetKind::Binary;

  MiEstimate out;
  out.estimator = EstimatorKind::Regression;
  out.n_samples = n;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(cfg.seed);
  rng.shuffle(order);
  std::vector<std::size_t> fold_of(n);
  for (std::size_t i = 0; i < n; ++i) fold_of[order[i]] = i % folds;

  const GbdtLoss loss = binary ? GbdtLoss::Logistic : GbdtLoss::Squared;
  std::vector<double> oof(n, 0.0);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? test : train).push_back(i);
    if (columns.empty()) {
      double mu = 0.0;
      for (std::size_t i : train) mu += y[i];
      mu /= static_cast<double>(train.size());
      if (binary) {
        const double p = std::clamp(mu, 1e-12, 1.0 - 1e-12);
        mu = std::log(p / (1.0 - p));
      }
      for (std::size_t i : test) oof[i] = mu;
      continue;
    }
    const Gbdt model = Gbdt::fit(columns, y, train, cfg.regressor, loss);
    for (std::size_t i : test) oof[i] = model.predict_raw(columns, i);
  }

  double h_y = 0.0, h_cond = 0.0;
  if (binary) {
    h_y = entropy_binary(y);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = oof[i];
      const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      total += binary_entropy(p);
    }
    h_cond = total / static_cast<double>(n);
    out.detail["mean_predictive_entropy"] = h_cond;
  } else {
    bool degenerate_y = false;
    h_y = entropy_marginal(y, cfg.variance_floor, &degenerate_y);
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) sse += (y[i] - oof[i]) * (y[i] - oof[i]);
    const double res_var = sse / static_cast<double>(n);
    const bool degenerate_res = !(res_var > cfg.variance_floor);
    h_cond = gaussian_entropy(degenerate_res ? cfg.variance_floor : res_var);
    out.degenerate = degenerate_y || degenerate_res;
    out.detail["residual_variance"] = res_var;
  }
  out.detail["folds"] = static_cast<double>(folds);
  out.detail["h_y"] = h_y;
  out.detail["h_y_given_x"] = h_cond;
  out.raw = h_y - h_cond;
  out.value = std::max(out.raw, 0.0);
  return out;
}

MiEstimate estimate_mi(const std::vector<std::vector<double>>& columns, const std::vector<double>& y,
                       const EstimatorConfig& cfg) {
  if (cfg.kind == EstimatorKind::Gaussian) {
    if (cfg.target == TargetKind::Binary)
      throw ConfigError("estimator: binary targets need the regression estimator");
    return mi_gaussian(columns, y, cfg.variance_floor);
  }
  return mi_regression(columns, y, cfg);
}

// ---- utility set function ---------------------------------------------------

Utility::Utility(AlignedMatrix aligned, EstimatorConfig cfg)
    : aligned_(std::move(aligned)), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (aligned_.cols() > 63) throw ArgumentError("utility: at most 63 retrievers are supported");
  for (const auto& c : aligned_.columns)
    if (c.size() != aligned_.rows()) throw ArgumentError("utility: ragged aligned matrix");
}

SubsetMask Utility::full_mask() const {
  return size() == 0 ? 0 : (SubsetMask{1} << size()) - 1;
}

SubsetMask Utility::mask_of(const std::vector<std::string>& names) const {
  SubsetMask m = 0;
  for (const auto& name : names) {
    auto it = std::find(aligned_.column_names.begin(), aligned_.column_names.end(), name);
    if (it == aligned_.column_names.end())
      throw ArgumentError("utility: unknown retriever '" + name + "'");
    m |= SubsetMask{1} << (it - aligned_.column_names.begin());
  }
  return m;
}

std::vector<std::string> Utility::names_of(SubsetMask mask) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (mask >> i & 1) out.push_back(aligned_.column_names[i]);
  return out;
}

MiEstimate Utility::compute(SubsetMask mask) const {
  if (mask & ~full_mask()) throw ArgumentError("utility: subset mask refers to unknown columns");
  if (mask == 0) {
    MiEstimate e;
    e.estimator = cfg_.kind;
    e.n_samples = aligned_.rows();
    return e;
  }
  std::vector<std::vector<double>> cols;
  for (std::size_t i = 0; i < size(); ++i)
    if (mask >> i & 1) cols.push_back(aligned_.columns[i]);
  return estimate_mi(cols, aligned_.y, cfg_);
}

MiEstimate Utility::estimate(SubsetMask mask) const {
  {
    std::lock_guard lock(mu_);
    auto it = cache_.find(mask);
    if (it != cache_.end()) return it->second;
  }
  MiEstimate e = compute(mask);
  std::lock_guard lock(mu_);
  auto [it, inserted] = cache_.emplace(mask, e);
  if (inserted) ++evaluations_;
  return it->second;
}

void Utility::precompute(const std::vector<SubsetMask>& masks) const {
  std::vector<SubsetMask> todo;
  {
    std::lock_guard lock(mu_);
    for (SubsetMask m : masks)
      if (!cache_.count(m)) todo.push_back(m);
  }
  std::sort(todo.begin(), todo.end());
  todo.erase(std::unique(todo.begin(), todo.end()), todo.end());
  parallel_for(todo.size(), [&](std::size_t i) { estimate(todo[i]); });
}

std::map<SubsetMask, MiEstimate> Utility::snapshot() const {
  std::lock_guard lock(mu_);
  return cache_;
}

std::size_t Utility::evaluations() const {
  std::lock_guard lock(mu_);
  return evaluations_;
}

double marginal_contribution(const Utility& f, std::size_t i) {
  if (f.size() < 2) throw ArgumentError("marginal_contribution: need at least two retrievers");
  if (i >= f.size()) throw ArgumentError("marginal_contribution: index out of range");
  const SubsetMask all = f.full_mask();
  return f(all) - f(all & ~(SubsetMask{1} << i));
}

double interaction_information(const Utility& f, std::size_t i, std::size_t j) {
  if (i == j) throw ArgumentError("interaction_information: i and j must differ");
  if (i >= f.size() || j >= f.size())
    throw ArgumentError("interaction_information: index out of range");
  const SubsetMask mi = SubsetMask{1} << i, mj = SubsetMask{1} << j;
  return f(mi) - (f(mi | mj) - f(mj));
}

double distance(double ii_value) { return std::exp(-ii_value); }

}  // namespace ragmi
