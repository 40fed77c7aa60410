#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ragmi/data_model.hpp"
#include "ragmi/divergence_metrics.hpp"
#include "ragmi/fusion.hpp"
#include "ragmi/mi_core.hpp"

namespace ragmi {

struct SearchConfig {
  double train_fraction = 0.2;
  std::uint64_t split_seed = 0;
  int max_subset_size = 5;
  /// Fusion templates without weights or temperatures; empty means one
  /// default template per method.
  std::vector<FusionSpec> methods;
  MetricConfig metric;  // tau for Div and learned weights, top_k for the candidate sets
  bool evaluate_all = false;  // attach test metrics to every candidate, not just the winner

  void validate() const;
  std::vector<FusionSpec> templates() const;
};

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Seeded shuffle of query ids; the first ceil(train_fraction * n) are train.
Split split_queries(const std::vector<QaPair>& qa, const SearchConfig& cfg);

struct EvalMetrics {
  double recall_at_1 = 0.0;
  double mrr = 0.0;
  double div = 0.0;
};

struct EnsembleResult {
  std::vector<std::string> subset;  // sorted names
  FusionSpec spec;                  // fitted on train
  EvalMetrics train;
  std::optional<EvalMetrics> test;
  std::size_t rank = 0;  // 1-based position in the search ranking
};

/// Fits `spec` on the train split for `subset` and evaluates it. Singletons
/// are scored through a one-hot z-score fusion whatever `spec` says, which
/// preserves the retriever's own order.
EnsembleResult evaluate_subset(const std::vector<RetrieverRun>& runs,
                               const std::vector<std::string>& subset, const FusionSpec& spec,
                               const TargetMap& targets, const std::vector<QaPair>& qa,
                               const Split& split, const SearchConfig& cfg, bool with_test);

/// True when `a` ranks ahead of `b`: higher train recall@1, then lower train
/// Div, then lexicographic subset, then method order.
bool ranks_before(const EnsembleResult& a, const EnsembleResult& b);

/// Exhaustive over subsets up to max_subset_size (greedy growth beyond) for
/// every template. Returns all candidates in rank order; the winner carries
/// test metrics.
std::vector<EnsembleResult> search(const std::vector<RetrieverRun>& runs, const TargetMap& targets,
                                   const std::vector<QaPair>& qa, const SearchConfig& cfg);

struct MiPerturbation {
  std::string change;  // "best", "-name" or "+name"
  std::vector<std::string> subset;
  double mi = 0.0;
};

/// F(S) for the best subset and every single add/drop variant, descending.
std::vector<MiPerturbation> perturb_mi(const Utility& f, const std::vector<std::string>& best_subset);

struct CurvePoint {
  int step = 0;  // negative for drops, 0 for the best subset, positive for adds
  std::string change;
  std::vector<std::string> subset;
  double train_recall = 0.0;
  double test_recall = 0.0;
};

/// Greedy drop sequence down to a singleton and greedy add sequence up to all
/// retrievers, each refit on train and evaluated on test. Ordered by step.
std::vector<CurvePoint> perturb_recall(const std::vector<RetrieverRun>& runs,
                                       const TargetMap& targets, const std::vector<QaPair>& qa,
                                       const EnsembleResult& best, const SearchConfig& cfg);

std::string subset_label(const std::vector<std::string>& subset);

}  // namespace ragmi
