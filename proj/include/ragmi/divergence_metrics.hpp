#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ragmi/data_model.hpp"

namespace ragmi {

struct MetricConfig {
  double tau = 1.0;        // softmax temperature applied to raw retriever scores
  double epsilon = 1e-12;  // guard inside KL terms
  int top_k = 10;

  void validate() const;
};

struct SweepGrid {
  std::vector<int> top_k_values{3, 5, 10, 20, 50, 100};
  std::vector<std::string> anchors{"union"};  // "union" or "single:<name>"
  std::vector<double> gamma_values{2.0, 10.0, 100.0};

  void validate() const;
};

/// Temperature softmax of raw scores, max-subtracted.
ChunkDistribution to_distribution(const std::string& query_id,
                                  const std::vector<std::pair<std::string, double>>& scores,
                                  const MetricConfig& cfg);

/// Jensen-Shannon divergence in nats. Chunk ids missing from one side count
/// as probability zero. Symmetric; result clamped to [0, ln 2].
double jsd(const ChunkDistribution& p, const ChunkDistribution& q, double epsilon = 1e-12);

/// Deterministic pairwise summation.
double pairwise_sum(const double* values, std::size_t n);

struct DivergenceDetail {
  double mean = 0.0;
  std::vector<std::pair<std::string, double>> per_query;  // anchor order
};

/// Mean over anchor queries of JSD(softmax(scores/tau), target restricted to
/// the anchor list). Chunks the retriever did not return score 0.0.
DivergenceDetail divergence_detail(const RetrieverRun& run, const TargetMap& targets,
                                   const AnchorMap& anchor, const MetricConfig& cfg);

double divergence_score(const RetrieverRun& run, const TargetMap& targets, const AnchorMap& anchor,
                        const MetricConfig& cfg);

struct RankMetric {
  double value = 0.0;
  std::size_t scored = 0;    // queries with at least one golden chunk
  std::size_t excluded = 0;  // golden-less queries left out
};

/// Fraction of scoreable queries with a golden chunk in the run's top k.
RankMetric recall_at_k(const RetrieverRun& run, const std::vector<QaPair>& qa, int k);

/// Mean reciprocal rank of the first golden chunk (0 when absent).
RankMetric mrr(const RetrieverRun& run, const std::vector<QaPair>& qa);

/// Per-query hit@k indicator over scoreable queries, keyed by query id.
std::vector<std::pair<std::string, double>> hits_at_k(const RetrieverRun& run,
                                                      const std::vector<QaPair>& qa, int k);

/// Sample Pearson correlation. Throws ArgumentError on length mismatch or
/// fewer than two points, EstimatorError when either side has zero variance.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

struct SweepRow {
  std::string retriever;  // "*" for the across-retriever correlation
  int top_k = 0;
  std::string anchor;
  double gamma = 0.0;
  double pearson = 0.0;
  std::size_t points = 0;
};

/// For every (top_k, anchor, gamma) cell: rebuild the reinforced target from
/// the raw CP* cache, recompute Div on that anchor, and correlate recall@1
/// with -Div. The "*" row correlates across retrievers; per-retriever rows
/// correlate per-query hit@1 with per-query -JSD. Cells or rows that cannot
/// be computed are skipped and reported in `warnings`.
std::vector<SweepRow> hparam_sweep(const std::vector<RetrieverRun>& runs,
                                   const std::vector<QaPair>& qa, const TargetMap& cp_raw,
                                   const SweepGrid& grid, const MetricConfig& cfg,
                                   std::vector<std::string>* warnings = nullptr);

}  // namespace ragmi
