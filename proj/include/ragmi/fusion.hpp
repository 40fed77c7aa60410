#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ragmi/data_model.hpp"
#include "ragmi/divergence_metrics.hpp"

namespace ragmi {

enum class FusionMethod {
  ZScoreLinear,
  OpinionPool,
  TemperaturePool,
  LogitPool,
  NoisyOr,
  DivergenceWeighted,
  RRF,
  Borda,
  RRA,
  BMA,
  RankCentrality,
  LearnedLinear,
};

const std::vector<FusionMethod>& all_fusion_methods();
std::string method_name(FusionMethod m);
FusionMethod parse_method(const std::string& name);

struct FusionSpec {
  FusionMethod method = FusionMethod::ZScoreLinear;
  std::vector<double> weights;       // empty: method default
  std::vector<double> temperatures;  // empty: 1.0 each
  double rrf_k = 60.0;
  std::optional<double> lambda;  // DivergenceWeighted: exp(-lambda Div) instead of 1/(eps + Div)
  double epsilon = 1e-9;

  void validate() const;
  /// True when fit_fusion() must run before fuse().
  bool needs_fit() const;
};

// ---- per-query building blocks ----------------------------------------------
// Matrices are indexed [retriever][candidate]. Ranks use 0 for "not retrieved".

/// (s - mean) / (population sd + eps) over one list.
std::vector<double> znorm(const std::vector<double>& scores, double epsilon = 1e-9);

std::vector<double> fuse_linear(const std::vector<std::vector<double>>& z,
                                const std::vector<double>& w);
/// Normalized weighted geometric pool.
std::vector<double> fuse_opinion_pool(const std::vector<std::vector<double>>& p,
                                      const std::vector<double>& w);
/// Sum of weighted log-odds; p clipped to [eps, 1 - eps].
std::vector<double> fuse_logit(const std::vector<std::vector<double>>& p,
                               const std::vector<double>& w, double epsilon = 1e-9);
std::vector<double> fuse_noisy_or(const std::vector<std::vector<double>>& p,
                                  const std::vector<double>& w);

enum class DivWeightMode { Exponential, Inverse };
std::vector<double> weights_from_divergence(const std::vector<double>& div, DivWeightMode mode,
                                            double lambda_or_epsilon);

std::vector<double> fuse_rrf(const std::vector<std::vector<int>>& ranks, double k = 60.0);
std::vector<double> fuse_borda(const std::vector<std::vector<int>>& ranks,
                               const std::vector<double>& w, std::size_t list_size);
/// -ln of the minimum Beta order-statistic p-value; unranked counts as p = 1.
std::vector<double> fuse_rra(const std::vector<std::vector<int>>& ranks, std::size_t list_size);
/// Normalized prior-weighted mixture.
std::vector<double> fuse_bma(const std::vector<std::vector<double>>& p,
                             const std::vector<double>& priors);
/// Stationary distribution of the pairwise-preference chain.
std::vector<double> fuse_rank_centrality(const std::vector<std::vector<double>>& z);

/// Row-wise softmax(x / tau).
std::vector<double> softmax(const std::vector<double>& x, double tau = 1.0);

/// Euclidean projection onto the probability simplex.
std::vector<double> project_simplex(const std::vector<double>& v);

struct LearnTrace {
  std::vector<double> loss;  // loss after each accepted iteration, starting with the initial value
};

/// Mean over queries of CE(target_q, softmax(sum_i w_i z_qi / tau)).
double linear_fusion_loss(const std::vector<std::vector<std::vector<double>>>& z,
                          const std::vector<std::vector<double>>& targets,
                          const std::vector<double>& w, double tau);

/// Projected gradient descent on the simplex from uniform weights
/// (step 0.1, 500 iterations, step halving when the loss would rise).
/// z is [query][retriever][candidate], targets [query][candidate].
std::vector<double> learn_weights(const std::vector<std::vector<std::vector<double>>>& z,
                                  const std::vector<std::vector<double>>& targets, double tau,
                                  LearnTrace* trace = nullptr);

// ---- run-level --------------------------------------------------------------

/// One query's candidate set with each retriever's view of it.
struct QueryView {
  std::string query_id;
  std::vector<std::string> candidates;
  std::vector<std::vector<double>> z;     // z-scored within the candidate set, 0 when absent
  std::vector<std::vector<int>> rank;     // re-ranked within the candidate set, 0 when absent
  std::vector<std::vector<char>> present;
};

QueryView make_view(const std::vector<RetrieverRun>& runs, const std::string& query_id,
                    const std::vector<std::string>& candidates, double epsilon = 1e-9);

/// softmax(z / tau_r) over retrieved candidates, eps for the rest, renormalized.
std::vector<std::vector<double>> view_probabilities(const QueryView& view,
                                                    const std::vector<double>& temperatures,
                                                    double epsilon);

/// Fused scores for one query under a fitted spec.
std::vector<double> fuse_query(const QueryView& view, const FusionSpec& spec);

/// Fills learnable parameters from the queries in `train_anchor`.
FusionSpec fit_fusion(const std::vector<RetrieverRun>& runs, const FusionSpec& spec,
                      const TargetMap& targets, const AnchorMap& train_anchor,
                      const MetricConfig& cfg);

/// Fuses every query in `anchor` into a run named "ensemble:<method>".
RetrieverRun fuse(const std::vector<RetrieverRun>& runs, const FusionSpec& spec,
                  const AnchorMap& anchor);

}  // namespace ragmi
