#include "ragmi/ensemble_search.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ragmi/error.hpp"
#include "ragmi/parallel.hpp"
#include "ragmi/random.hpp"

namespace ragmi {

namespace {

std::size_t method_index(FusionMethod m) {
  const auto& all = all_fusion_methods();
  return static_cast<std::size_t>(std::find(all.begin(), all.end(), m) - all.begin());
}

FusionSpec unfitted(FusionSpec spec) {
  spec.weights.clear();
  spec.temperatures.clear();
  return spec;
}

AnchorMap restrict_queries(const AnchorMap& anchor, const std::set<std::string>& ids) {
  AnchorMap out;
  for (const auto& [q, cands] : anchor)
    if (ids.count(q)) out.emplace(q, cands);
  return out;
}

std::vector<QaPair> filter_qa(const std::vector<QaPair>& qa, const std::set<std::string>& ids) {
  std::vector<QaPair> out;
  for (const auto& p : qa)
    if (ids.count(p.query_id)) out.push_back(p);
  return out;
}

EvalMetrics evaluate(const RetrieverRun& fused, const TargetMap& targets, const AnchorMap& anchor,
                     const std::vector<QaPair>& qa, const MetricConfig& cfg) {
  EvalMetrics m;
  m.recall_at_1 = recall_at_k(fused, qa, 1).value;
  m.mrr = mrr(fused, qa).value;
  m.div = divergence_score(fused, targets, anchor, cfg);
  return m;
}

std::vector<std::string> with(const std::vector<std::string>& s, const std::string& name) {
  auto out = s;
  out.push_back(name);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> without(const std::vector<std::string>& s, const std::string& name) {
  std::vector<std::string> out;
  for (const auto& x : s)
    if (x != name) out.push_back(x);
  return out;
}

}  // namespace

void SearchConfig::validate() const {
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
    throw ConfigError("search: train_fraction must be in (0, 1)");
  if (max_subset_size < 1) throw ConfigError("search: max_subset_size must be >= 1");
  for (const auto& m : methods) {
    m.validate();
    if (!m.weights.empty() || !m.temperatures.empty())
      throw ConfigError("search: method templates must not carry weights or temperatures");
  }
  metric.validate();
}

std::vector<FusionSpec> SearchConfig::templates() const {
  if (!methods.empty()) return methods;
  std::vector<FusionSpec> out;
  for (FusionMethod m : all_fusion_methods()) {
    FusionSpec s;
    s.method = m;
    out.push_back(s);
  }
  return out;
}

std::string subset_label(const std::vector<std::string>& subset) {
  std::string out;
  for (const auto& s : subset) out += (out.empty() ? "" : "+") + s;
  return out;
}

Split split_queries(const std::vector<QaPair>& qa, const SearchConfig& cfg) {
  cfg.validate();
  if (qa.size() < 5) throw ArgumentError("split: need at least 5 queries");
  std::vector<std::string> ids;
  for (const auto& p : qa) ids.push_back(p.query_id);
  std::sort(ids.begin(), ids.end());
  Rng rng(cfg.split_seed);
  rng.shuffle(ids);
  const auto n_train = static_cast<std::size_t>(std::ceil(cfg.train_fraction * ids.size() - 1e-9));
  Split s;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  if (s.train.empty() || s.test.empty()) throw ArgumentError("split: a side of the split is empty");
  return s;
}

EnsembleResult evaluate_subset(const std::vector<RetrieverRun>& runs,
                               const std::vector<std::string>& subset, const FusionSpec& spec,
                               const TargetMap& targets, const std::vector<QaPair>& qa,
                               const Split& split, const SearchConfig& cfg, bool with_test) {
  if (subset.empty()) throw ArgumentError("search: empty retriever subset");
  std::vector<std::string> names = subset;
  std::sort(names.begin(), names.end());
  std::vector<RetrieverRun> sub;
  for (const auto& n : names) {
    auto it = std::find_if(runs.begin(), runs.end(), [&](const RetrieverRun& r) { return r.name == n; });
    if (it == runs.end()) throw ArgumentError("search: unknown retriever '" + n + "'");
    sub.push_back(*it);
  }
  FusionSpec tmpl = unfitted(spec);
  if (sub.size() == 1) tmpl = FusionSpec{};

  const AnchorMap anchor = build_anchor_lists(sub, AnchorPolicy::union_of_all(cfg.metric.top_k));
  const std::set<std::string> train_ids(split.train.begin(), split.train.end());
  const AnchorMap train_anchor = restrict_queries(anchor, train_ids);

  EnsembleResult r;
  r.subset = names;
  r.spec = fit_fusion(sub, tmpl, targets, train_anchor, cfg.metric);
  r.train = evaluate(fuse(sub, r.spec, train_anchor), targets, train_anchor, filter_qa(qa, train_ids),
                     cfg.metric);
  if (with_test) {
    const std::set<std::string> test_ids(split.test.begin(), split.test.end());
    const AnchorMap test_anchor = restrict_queries(anchor, test_ids);
    r.test = evaluate(fuse(sub, r.spec, test_anchor), targets, test_anchor, filter_qa(qa, test_ids),
                      cfg.metric);
  }
  return r;
}

bool ranks_before(const EnsembleResult& a, const EnsembleResult& b) {
  if (a.train.recall_at_1 != b.train.recall_at_1) return a.train.recall_at_1 > b.train.recall_at_1;
  if (a.train.div != b.train.div) return a.train.div < b.train.div;
  if (a.subset != b.subset) return a.subset < b.subset;
  return method_index(a.spec.method) < method_index(b.spec.method);
}

std::vector<EnsembleResult> search(const std::vector<RetrieverRun>& runs, const TargetMap& targets,
                                   const std::vector<QaPair>& qa, const SearchConfig& cfg) {
  cfg.validate();
  if (runs.empty()) throw ArgumentError("search: no retrievers");
  const auto templates = cfg.templates();
  if (templates.empty()) throw ConfigError("search: empty method list");
  const Split split = split_queries(qa, cfg);

  std::vector<std::string> names;
  for (const auto& r : runs) names.push_back(r.name);
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end())
    throw ArgumentError("search: duplicate retriever names");
  const std::size_t m = names.size();
  const std::size_t exhaustive = std::min<std::size_t>(m, static_cast<std::size_t>(cfg.max_subset_size));

  struct Job {
    std::vector<std::string> subset;
    FusionSpec spec;
  };
  std::vector<Job> jobs;
  // Lexicographic enumeration of k-combinations for k = 1..exhaustive.
  for (std::size_t k = 1; k <= exhaustive; ++k) {
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    for (;;) {
      std::vector<std::string> s;
      for (std::size_t i : idx) s.push_back(names[i]);
      if (k == 1) {
        jobs.push_back({s, FusionSpec{}});
      } else {
        for (const auto& t : templates) jobs.push_back({s, t});
      }
      std::size_t pos = k;
      while (pos > 0 && idx[pos - 1] == m - k + pos - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t i = pos; i < k; ++i) idx[i] = idx[i - 1] + 1;
    }
  }

  std::vector<EnsembleResult> results(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    results[i] = evaluate_subset(runs, jobs[i].subset, jobs[i].spec, targets, qa, split, cfg, false);
  });

  // Beyond the exhaustive size, grow each method's best subset one retriever
  // at a time.
  if (exhaustive < m) {
    for (const auto& t : templates) {
      const EnsembleResult* seed = nullptr;
      for (const auto& r : results)
        if (r.subset.size() == exhaustive && r.spec.method == t.method &&
            (!seed || ranks_before(r, *seed)))
          seed = &r;
      if (!seed) continue;
      std::vector<std::string> cur = seed->subset;
      while (cur.size() < m) {
        std::vector<std::string> rest;
        for (const auto& n : names)
          if (!std::binary_search(cur.begin(), cur.end(), n)) rest.push_back(n);
        std::vector<EnsembleResult> grown(rest.size());
        parallel_for(rest.size(), [&](std::size_t i) {
          grown[i] = evaluate_subset(runs, with(cur, rest[i]), t, targets, qa, split, cfg, false);
        });
        std::size_t best = 0;
        for (std::size_t i = 1; i < grown.size(); ++i)
          if (ranks_before(grown[i], grown[best])) best = i;
        cur = grown[best].subset;
        results.push_back(std::move(grown[best]));
      }
    }
  }

  std::stable_sort(results.begin(), results.end(), ranks_before);
  // Greedy growth can revisit a (subset, method) pair already present.
  results.erase(std::unique(results.begin(), results.end(),
                            [](const EnsembleResult& a, const EnsembleResult& b) {
                              return a.subset == b.subset && a.spec.method == b.spec.method;
                            }),
                results.end());
  for (std::size_t i = 0; i < results.size(); ++i) results[i].rank = i + 1;

  const std::size_t n_test = cfg.evaluate_all ? results.size() : 1;
  parallel_for(n_test, [&](std::size_t i) {
    EnsembleResult full = evaluate_subset(runs, results[i].subset, results[i].spec, targets, qa,
                                          split, cfg, true);
    results[i].test = full.test;
  });
  return results;
}

std::vector<MiPerturbation> perturb_mi(const Utility& f, const std::vector<std::string>& best_subset) {
  std::vector<std::string> best = best_subset;
  std::sort(best.begin(), best.end());
  f.mask_of(best);
  std::vector<MiPerturbation> rows;
  rows.push_back({"best", best, 0.0});
  for (const auto& n : best)
    if (best.size() > 1) rows.push_back({"-" + n, without(best, n), 0.0});
  for (const auto& n : f.names())
    if (!std::binary_search(best.begin(), best.end(), n)) rows.push_back({"+" + n, with(best, n), 0.0});

  std::vector<SubsetMask> masks;
  for (const auto& r : rows) masks.push_back(f.mask_of(r.subset));
  f.precompute(masks);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].mi = f(masks[i]);
  std::stable_sort(rows.begin(), rows.end(),
                   [](const MiPerturbation& a, const MiPerturbation& b) { return a.mi > b.mi; });
  return rows;
}

std::vector<CurvePoint> perturb_recall(const std::vector<RetrieverRun>& runs,
                                       const TargetMap& targets, const std::vector<QaPair>& qa,
                                       const EnsembleResult& best, const SearchConfig& cfg) {
  cfg.validate();
  const Split split = split_queries(qa, cfg);
  const FusionSpec tmpl = unfitted(best.spec);
  std::vector<std::string> names;
  for (const auto& r : runs) names.push_back(r.name);
  std::sort(names.begin(), names.end());

  auto point = [&](int step, std::string change, const std::vector<std::string>& subset) {
    const EnsembleResult r = evaluate_subset(runs, subset, tmpl, targets, qa, split, cfg, true);
    return CurvePoint{step, std::move(change), r.subset, r.train.recall_at_1, r.test->recall_at_1};
  };
  // Picks the candidate with the best train objective among `options`.
  auto greedy = [&](const std::vector<std::vector<std::string>>& options) {
    std::vector<EnsembleResult> evals(options.size());
    parallel_for(options.size(), [&](std::size_t i) {
      evals[i] = evaluate_subset(runs, options[i], tmpl, targets, qa, split, cfg, false);
    });
    std::size_t pick = 0;
    for (std::size_t i = 1; i < evals.size(); ++i)
      if (ranks_before(evals[i], evals[pick])) pick = i;
    return pick;
  };

  std::vector<CurvePoint> drops, adds;
  std::vector<std::string> cur = best.subset;
  for (int step = -1; cur.size() > 1; --step) {
    std::vector<std::vector<std::string>> options;
    for (const auto& n : cur) options.push_back(without(cur, n));
    const std::size_t pick = greedy(options);
    std::string removed;
    for (const auto& n : cur)
      if (!std::binary_search(options[pick].begin(), options[pick].end(), n)) removed = n;
    cur = options[pick];
    drops.push_back(point(step, "-" + removed, cur));
  }
  cur = best.subset;
  for (int step = 1; cur.size() < names.size(); ++step) {
    std::vector<std::vector<std::string>> options;
    std::vector<std::string> added;
    for (const auto& n : names)
      if (!std::binary_search(cur.begin(), cur.end(), n)) {
        options.push_back(with(cur, n));
        added.push_back(n);
      }
    const std::size_t pick = greedy(options);
    cur = options[pick];
    adds.push_back(point(step, "+" + added[pick], cur));
  }

  std::vector<CurvePoint> curve(drops.rbegin(), drops.rend());
  curve.push_back(point(0, "best", best.subset));
  curve.insert(curve.end(), adds.begin(), adds.end());
  return curve;
}

}  // namespace ragmi
