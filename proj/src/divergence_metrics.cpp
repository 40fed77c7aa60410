#include "ragmi/divergence_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "ragmi/answer_scorer.hpp"
#include "ragmi/error.hpp"
#include "ragmi/kernels.hpp"

namespace ragmi {

void MetricConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
}

void SweepGrid::validate() const {
  if (top_k_values.empty() || anchors.empty() || gamma_values.empty())
    throw ConfigError("sweep grid lists must be non-empty");
}

ChunkDistribution to_distribution(const std::string& query_id,
                                  const std::vector<std::pair<std::string, double>>& scores,
                                  const MetricConfig& cfg) {
  if (scores.empty()) throw ArgumentError("to_distribution: empty score list");
  if (!(cfg.tau > 0.0)) throw ArgumentError("to_distribution: tau must be > 0");
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& [id, s] : scores) {
    if (!std::isfinite(s)) throw ArgumentError("to_distribution: non-finite score");
    mx = std::max(mx, s);
  }
  std::vector<std::string> ids;
  std::vector<double> w;
  ids.reserve(scores.size());
  w.reserve(scores.size());
  for (const auto& [id, s] : scores) {
    ids.push_back(id);
    w.push_back(std::exp(s / cfg.tau - mx / cfg.tau));
  }
  return normalized_distribution(query_id, ids, w);
}

double jsd(const ChunkDistribution& p, const ChunkDistribution& q, double epsilon) {
  // Merge on chunk id so argument order cannot change the summation order.
  std::map<std::string, std::pair<double, double>> joint;
  for (const auto& e : p.entries) joint[e.chunk_id].first += e.probability;
  for (const auto& e : q.entries) joint[e.chunk_id].second += e.probability;
  double total = 0.0;
  for (const auto& [id, pq] : joint) {
    const auto [a, b] = pq;
    const double m = 0.5 * (a + b);
    const double guard = std::max(m, epsilon);
    double term = 0.0;
    if (a > 0.0) term += a * std::log(a / guard);
    if (b > 0.0) term += b * std::log(b / guard);
    total += 0.5 * term;
  }
  return std::clamp(total, 0.0, std::numbers::ln2);
}

double pairwise_sum(const double* values, std::size_t n) {
  if (n <= 8) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += values[i];
    return acc;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

DivergenceDetail divergence_detail(const RetrieverRun& run, const TargetMap& targets,
                                   const AnchorMap& anchor, const MetricConfig& cfg) {
  cfg.validate();
  DivergenceDetail out;
  std::vector<double> values;
  for (const auto& [q, chunks] : anchor) {
    if (chunks.empty()) continue;
    auto t = targets.find(q);
    if (t == targets.end()) throw AlignmentError("no target distribution for query '" + q + "'");
    const ChunkDistribution target = restrict_to(t->second, chunks);
    const RankedList* list = run.find(q);
    std::vector<std::pair<std::string, double>> scores;
    scores.reserve(chunks.size());
    for (const auto& c : chunks) {
      std::optional<double> s = list ? score_in(*list, c) : std::nullopt;
      scores.emplace_back(c, s.value_or(0.0));
    }
    const double d = jsd(to_distribution(q, scores, cfg), target, cfg.epsilon);
    out.per_query.emplace_back(q, d);
    values.push_back(d);
  }
  if (values.empty()) throw ArgumentError("divergence_score: anchor has no queries");
  out.mean = pairwise_sum(values.data(), values.size()) / static_cast<double>(values.size());
  return out;
}

double divergence_score(const RetrieverRun& run, const TargetMap& targets, const AnchorMap& anchor,
                        const MetricConfig& cfg) {
  return divergence_detail(run, targets, anchor, cfg).mean;
}

namespace {

/// 1-based rank of the first golden chunk in the list, or 0.
int first_golden_rank(const RankedList* list, const QaPair& p) {
  if (!list) return 0;
  for (const auto& c : *list)
    if (p.golden_chunk_ids.count(c.chunk_id)) return c.rank;
  return 0;
}

}  // namespace

std::vector<std::pair<std::string, double>> hits_at_k(const RetrieverRun& run,
                                                      const std::vector<QaPair>& qa, int k) {
  if (k < 1) throw ArgumentError("recall_at_k: k must be >= 1");
  std::vector<std::pair<std::string, double>> out;
  for (const auto& p : qa) {
    if (p.golden_chunk_ids.empty()) continue;
    const int r = first_golden_rank(run.find(p.query_id), p);
    out.emplace_back(p.query_id, (r >= 1 && r <= k) ? 1.0 : 0.0);
  }
  return out;
}

RankMetric recall_at_k(const RetrieverRun& run, const std::vector<QaPair>& qa, int k) {
  auto hits = hits_at_k(run, qa, k);
  if (hits.empty()) throw ArgumentError("recall_at_k: no query has a golden chunk");
  double total = 0.0;
  for (const auto& [q, h] : hits) total += h;
  return {total / static_cast<double>(hits.size()), hits.size(), qa.size() - hits.size()};
}

RankMetric mrr(const RetrieverRun& run, const std::vector<QaPair>& qa) {
  RankMetric m;
  double total = 0.0;
  for (const auto& p : qa) {
    if (p.golden_chunk_ids.empty()) {
      ++m.excluded;
      continue;
    }
    ++m.scored;
    const int r = first_golden_rank(run.find(p.query_id), p);
    if (r > 0) total += 1.0 / static_cast<double>(r);
  }
  if (m.scored == 0) throw ArgumentError("mrr: no query has a golden chunk");
  m.value = total / static_cast<double>(m.scored);
  return m;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw ArgumentError("pearson: length mismatch");
  if (xs.size() < 2) throw ArgumentError("pearson: need at least two points");
  const double mx = kernels::mean(xs);
  const double my = kernels::mean(ys);
  const double sxx = kernels::sum_sq_dev(xs, mx);
  const double syy = kernels::sum_sq_dev(ys, my);
  if (!(sxx > 0.0) || !(syy > 0.0)) throw EstimatorError("pearson: zero variance, correlation undefined");
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) sxy += (xs[i] - mx) * (ys[i] - my);
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<SweepRow> hparam_sweep(const std::vector<RetrieverRun>& runs,
                                   const std::vector<QaPair>& qa, const TargetMap& cp_raw,
                                   const SweepGrid& grid, const MetricConfig& cfg,
                                   std::vector<std::string>* warnings) {
  grid.validate();
  auto warn = [&](std::string msg) {
    if (warnings) warnings->push_back(std::move(msg));
  };

  std::vector<double> recall(runs.size());
  std::vector<std::map<std::string, double>> hits(runs.size());
  for (std::size_t r = 0; r < runs.size(); ++r) {
    recall[r] = recall_at_k(runs[r], qa, 1).value;
    for (auto& [q, h] : hits_at_k(runs[r], qa, 1)) hits[r][q] = h;
  }

  std::vector<SweepRow> rows;
  for (int k : grid.top_k_values) {
    for (const auto& anchor_text : grid.anchors) {
      const AnchorPolicy policy = AnchorPolicy::parse(anchor_text, k);
      const AnchorMap anchor = build_anchor_lists(runs, policy);
      for (double gamma : grid.gamma_values) {
        const TargetMap targets = reinforce_all(cp_raw, qa, gamma);
        MetricConfig cell_cfg = cfg;
        cell_cfg.top_k = k;
        std::vector<DivergenceDetail> div;
        div.reserve(runs.size());
        for (const auto& run : runs) div.push_back(divergence_detail(run, targets, anchor, cell_cfg));

        const std::string cell = "top_k=" + std::to_string(k) + " anchor=" + policy.label() +
                                 " gamma=" + std::to_string(gamma);
        if (runs.size() < 2) {
          warn(cell + ": fewer than two retrievers, across-retriever correlation skipped");
        } else {
          std::vector<double> neg;
          for (const auto& d : div) neg.push_back(-d.mean);
          try {
            rows.push_back({"*", k, policy.label(), gamma, pearson(recall, neg), runs.size()});
          } catch (const EstimatorError& e) {
            warn(cell + ": " + e.what());
          }
        }
        for (std::size_t r = 0; r < runs.size(); ++r) {
          std::vector<double> xs, ys;
          for (const auto& [q, d] : div[r].per_query) {
            auto h = hits[r].find(q);
            if (h == hits[r].end()) continue;
            xs.push_back(h->second);
            ys.push_back(-d);
          }
          try {
            rows.push_back({runs[r].name, k, policy.label(), gamma, pearson(xs, ys), xs.size()});
          } catch (const Error& e) {
            warn(cell + " retriever=" + runs[r].name + ": " + e.what());
          }
        }
      }
    }
  }
  return rows;
}

}  // namespace ragmi
