#include <algorithm>
#include <set>

#include "ragmi/data_model.hpp"
#include "ragmi/error.hpp"

namespace ragmi {

AnchorMap build_anchor_lists(const std::vector<RetrieverRun>& runs, const AnchorPolicy& policy) {
  if (policy.top_k < 1) throw ConfigError("top_k must be >= 1");
  std::set<std::string> queries;
  for (const auto& run : runs)
    for (const auto& [q, list] : run.lists) queries.insert(q);

  const auto k = static_cast<std::size_t>(policy.top_k);
  AnchorMap anchor;

  if (policy.kind == AnchorPolicy::Kind::Single) {
    auto it = std::find_if(runs.begin(), runs.end(),
                           [&](const RetrieverRun& r) { return r.name == policy.retriever; });
    if (it == runs.end())
      throw ConfigError("anchor retriever '" + policy.retriever + "' is not among the loaded runs");
    for (const auto& q : queries) {
      const RankedList* list = it->find(q);
      if (!list)
        throw ConfigError("anchor retriever '" + policy.retriever + "' has no list for query '" +
                          q + "'");
      auto& out = anchor[q];
      for (std::size_t i = 0; i < list->size() && i < k; ++i) out.push_back((*list)[i].chunk_id);
    }
    return anchor;
  }

  // Union: best (minimum) rank across retrievers, then chunk_id.
  for (const auto& q : queries) {
    std::map<std::string, int> best_rank;
    for (const auto& run : runs) {
      const RankedList* list = run.find(q);
      if (!list) continue;
      for (const auto& c : *list) {
        auto [it, inserted] = best_rank.emplace(c.chunk_id, c.rank);
        if (!inserted) it->second = std::min(it->second, c.rank);
      }
    }
    std::vector<std::pair<int, std::string>> order;
    order.reserve(best_rank.size());
    for (const auto& [id, r] : best_rank) order.emplace_back(r, id);
    std::sort(order.begin(), order.end());
    auto& out = anchor[q];
    for (std::size_t i = 0; i < order.size() && i < k; ++i) out.push_back(order[i].second);
  }
  return anchor;
}

AlignedMatrix align(const std::vector<RetrieverRun>& runs, const TargetMap& target,
                    const AnchorMap& anchor) {
  AlignedMatrix m;
  for (const auto& run : runs) m.column_names.push_back(run.name);
  m.columns.assign(runs.size(), {});

  for (const auto& [q, chunks] : anchor) {
    auto t = target.find(q);
    if (t == target.end() && !chunks.empty())
      throw AlignmentError("no target distribution for query '" + q + "'");
    for (const auto& c : chunks) {
      auto p = t->second.probability_of(c);
      if (!p)
        throw AlignmentError("anchor chunk '" + c + "' of query '" + q +
                             "' is absent from the target distribution");
      m.y.push_back(*p);
      m.row_index.emplace_back(q, c);
    }
    for (std::size_t j = 0; j < runs.size(); ++j) {
      const RankedList* list = runs[j].find(q);
      for (const auto& c : chunks) {
        std::optional<double> s = list ? score_in(*list, c) : std::nullopt;
        m.columns[j].push_back(s.value_or(0.0));
      }
    }
  }
  return m;
}

}  // namespace ragmi
