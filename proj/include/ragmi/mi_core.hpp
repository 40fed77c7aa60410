#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "ragmi/data_model.hpp"
#include "ragmi/gbdt.hpp"

namespace ragmi {

enum class EstimatorKind { Gaussian, Regression };

/// Continuous targets use the residual-variance entropy; Binary targets
/// (y in {0,1}) use the empirical entropy and mean out-of-fold predictive
/// entropy of a logistic booster.
enum class TargetKind { Continuous, Binary };

std::string estimator_name(EstimatorKind kind);
EstimatorKind parse_estimator(const std::string& text);

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::Regression;
  TargetKind target = TargetKind::Continuous;
  int folds = 5;
  double variance_floor = 1e-6;
  GbdtParams regressor;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MiEstimate {
  double value = 0.0;  // nats, clamped >= 0
  double raw = 0.0;    // before clamping
  EstimatorKind estimator = EstimatorKind::Gaussian;
  std::size_t n_samples = 0;
  bool degenerate = false;  // a variance hit the floor
  std::map<std::string, double> detail;
};

/// 0.5 ln(2 pi e max(var(y), floor)). Sets *degenerate when the floor binds.
double entropy_marginal(const std::vector<double>& y, double variance_floor = 1e-6,
                        bool* degenerate = nullptr);

/// Empirical entropy of a {0,1} vector, nats.
double entropy_binary(const std::vector<double>& y);

/// Closed-form Gaussian MI between y and the given columns (column-major).
MiEstimate mi_gaussian(const std::vector<std::vector<double>>& columns, const std::vector<double>& y,
                       double variance_floor = 1e-6);

/// Out-of-fold regression-residual MI.
MiEstimate mi_regression(const std::vector<std::vector<double>>& columns,
                         const std::vector<double>& y, const EstimatorConfig& cfg);

MiEstimate estimate_mi(const std::vector<std::vector<double>>& columns, const std::vector<double>& y,
                       const EstimatorConfig& cfg);

using SubsetMask = std::uint64_t;

/// The set function F(S) = I(Y; X_S) over an aligned matrix, with F(empty) = 0.
/// Every subset is estimated at most once; the cache is safe to fill from
/// several threads.
class Utility {
 public:
  Utility(AlignedMatrix aligned, EstimatorConfig cfg);

  std::size_t size() const { return aligned_.cols(); }
  const std::vector<std::string>& names() const { return aligned_.column_names; }
  const AlignedMatrix& aligned() const { return aligned_; }
  const EstimatorConfig& config() const { return cfg_; }

  SubsetMask full_mask() const;
  SubsetMask mask_of(const std::vector<std::string>& names) const;
  std::vector<std::string> names_of(SubsetMask mask) const;

  MiEstimate estimate(SubsetMask mask) const;
  double operator()(SubsetMask mask) const { return estimate(mask).value; }

  /// Estimates every uncached mask in parallel.
  void precompute(const std::vector<SubsetMask>& masks) const;

  std::map<SubsetMask, MiEstimate> snapshot() const;
  std::size_t evaluations() const;

 private:
  MiEstimate compute(SubsetMask mask) const;

  AlignedMatrix aligned_;
  EstimatorConfig cfg_;
  mutable std::mutex mu_;
  mutable std::map<SubsetMask, MiEstimate> cache_;
  mutable std::size_t evaluations_ = 0;
};

/// C_i = F(all) - F(all \ {i}). Requires at least two columns.
double marginal_contribution(const Utility& f, std::size_t i);

/// II = I(Y;X_i) - [F({i,j}) - F({j})]. Positive means redundancy.
double interaction_information(const Utility& f, std::size_t i, std::size_t j);

/// d = exp(-II)
double distance(double ii_value);

}  // namespace ragmi
