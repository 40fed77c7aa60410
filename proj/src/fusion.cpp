#include "ragmi/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "ragmi/beta.hpp"
#include "ragmi/error.hpp"
#include "ragmi/kernels.hpp"
#include "ragmi/parallel.hpp"

namespace ragmi {

namespace {

const std::vector<std::pair<FusionMethod, const char*>>& method_table() {
  static const std::vector<std::pair<FusionMethod, const char*>> table = {
      {FusionMethod::ZScoreLinear, "zscore_linear"},
      {FusionMethod::OpinionPool, "opinion_pool"},
      {FusionMethod::TemperaturePool, "temperature_pool"},
      {FusionMethod::LogitPool, "logit_pool"},
      {FusionMethod::NoisyOr, "noisy_or"},
      {FusionMethod::DivergenceWeighted, "divergence_weighted"},
      {FusionMethod::RRF, "rrf"},
      {FusionMethod::Borda, "borda"},
      {FusionMethod::RRA, "rra"},
      {FusionMethod::BMA, "bma"},
      {FusionMethod::RankCentrality, "rank_centrality"},
      {FusionMethod::LearnedLinear, "learned_linear"},
  };
  return table;
}

std::size_t width_of(const std::vector<std::vector<double>>& m) {
  if (m.empty()) throw ArgumentError("fusion: no retrievers");
  for (const auto& row : m)
    if (row.size() != m[0].size()) throw ArgumentError("fusion: ragged score matrix");
  return m[0].size();
}

std::size_t width_of(const std::vector<std::vector<int>>& m) {
  if (m.empty()) throw ArgumentError("fusion: no retrievers");
  for (const auto& row : m)
    if (row.size() != m[0].size()) throw ArgumentError("fusion: ragged rank matrix");
  return m[0].size();
}

void check_weights(const std::vector<double>& w, std::size_t r) {
  if (w.size() != r)
    throw ArgumentError("fusion: " + std::to_string(w.size()) + " weights for " +
                        std::to_string(r) + " retrievers");
}

std::vector<double> normalize(std::vector<double> v) {
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) throw EstimatorError("fusion: cannot normalize");
  for (double& x : v) x /= total;
  return v;
}

std::vector<double> uniform(std::size_t r) { return std::vector<double>(r, 1.0 / static_cast<double>(r)); }

std::vector<double> weights_or(const FusionSpec& spec, std::size_t r, double fill) {
  if (spec.weights.empty()) return fill > 0.0 ? std::vector<double>(r, fill) : uniform(r);
  check_weights(spec.weights, r);
  return spec.weights;
}

double cross_entropy_of(const std::vector<double>& target, const std::vector<double>& logits,
                        double tau) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double s : logits) mx = std::max(mx, s / tau);
  double lse = 0.0;
  for (double s : logits) lse += std::exp(s / tau - mx);
  lse = mx + std::log(lse);
  double ce = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c)
    if (target[c] > 0.0) ce -= target[c] * (logits[c] / tau - lse);
  return ce;
}

}  // namespace

const std::vector<FusionMethod>& all_fusion_methods() {
  static const std::vector<FusionMethod> all = [] {
    std::vector<FusionMethod> v;
    for (const auto& [m, name] : method_table()) v.push_back(m);
    return v;
  }();
  return all;
}

std::string method_name(FusionMethod m) {
  for (const auto& [k, name] : method_table())
    if (k == m) return name;
  throw ArgumentError("fusion: unknown method");
}

FusionMethod parse_method(const std::string& name) {
  for (const auto& [k, n] : method_table())
    if (name == n) return k;
  throw ConfigError("fusion: unknown method '" + name + "'");
}

void FusionSpec::validate() const {
  if (!weights.empty()) {
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw ConfigError("fusion: weights must be nonnegative");
      total += w;
    }
    if (std::fabs(total - 1.0) > 1e-9) throw ConfigError("fusion: weights must sum to 1");
  }
  for (double t : temperatures)
    if (!(t > 0.0)) throw ConfigError("fusion: temperatures must be > 0");
  if (!(rrf_k > 0.0)) throw ConfigError("fusion: rrf_k must be > 0");
  if (lambda && !(*lambda >= 0.0)) throw ConfigError("fusion: lambda must be >= 0");
  if (!(epsilon > 0.0) || !(epsilon < 0.5)) throw ConfigError("fusion: epsilon must be in (0, 0.5)");
}

bool FusionSpec::needs_fit() const {
  switch (method) {
    case FusionMethod::LearnedLinear:
    case FusionMethod::DivergenceWeighted:
      return weights.empty();
    case FusionMethod::TemperaturePool:
      return temperatures.empty();
    default:
      return false;
  }
}

// ---- building blocks --------------------------------------------------------

std::vector<double> znorm(const std::vector<double>& scores, double epsilon) {
  if (scores.empty()) return {};
  const double mu = kernels::mean(scores);
  const double sd = std::sqrt(kernels::variance(scores));
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double v = (scores[i] - mu) / (sd + epsilon);
    out[i] = v == 0.0 ? 0.0 : v;
  }
  return out;
}

std::vector<double> fuse_linear(const std::vector<std::vector<double>>& z,
                                const std::vector<double>& w) {
  const std::size_t n = width_of(z);
  check_weights(w, z.size());
  std::vector<double> out(n, 0.0);
  for (std::size_t r = 0; r < z.size(); ++r) kernels::axpy(w[r], z[r], out);
  return out;
}

std::vector<double> fuse_opinion_pool(const std::vector<std::vector<double>>& p,
                                      const std::vector<double>& w) {
  const std::size_t n = width_of(p);
  check_weights(w, p.size());
  std::vector<double> logp(n, 0.0);
  for (std::size_t r = 0; r < p.size(); ++r)
    for (std::size_t c = 0; c < n; ++c) {
      if (w[r] == 0.0) continue;
      if (!(p[r][c] > 0.0)) throw ArgumentError("opinion_pool: probabilities must be positive");
      logp[c] += w[r] * std::log(p[r][c]);
    }
  return softmax(logp, 1.0);
}

std::vector<double> fuse_logit(const std::vector<std::vector<double>>& p,
                               const std::vector<double>& w, double epsilon) {
  const std::size_t n = width_of(p);
  check_weights(w, p.size());
  std::vector<double> out(n, 0.0);
  for (std::size_t r = 0; r < p.size(); ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const double q = std::clamp(p[r][c], epsilon, 1.0 - epsilon);
      out[c] += w[r] * std::log(q / (1.0 - q));
    }
  return out;
}

std::vector<double> fuse_noisy_or(const std::vector<std::vector<double>>& p,
                                  const std::vector<double>& w) {
  const std::size_t n = width_of(p);
  check_weights(w, p.size());
  std::vector<double> out(n);
  for (std::size_t c = 0; c < n; ++c) {
    double miss = 1.0;
    for (std::size_t r = 0; r < p.size(); ++r) {
      const double q = std::clamp(p[r][c], 0.0, 1.0);
      if (w[r] != 0.0) miss *= std::pow(1.0 - q, w[r]);
    }
    out[c] = std::clamp(1.0 - miss, 0.0, 1.0);
  }
  return out;
}

std::vector<double> weights_from_divergence(const std::vector<double>& div, DivWeightMode mode,
                                            double lambda_or_epsilon) {
  if (div.empty()) throw ArgumentError("weights_from_divergence: empty input");
  std::vector<double> w(div.size());
  for (std::size_t i = 0; i < div.size(); ++i) {
    if (!(div[i] >= 0.0)) throw ArgumentError("weights_from_divergence: divergences must be >= 0");
    w[i] = mode == DivWeightMode::Exponential ? std::exp(-lambda_or_epsilon * div[i])
                                              : 1.0 / (lambda_or_epsilon + div[i]);
  }
  if (mode == DivWeightMode::Inverse) {
    // With eps = 0 a zero divergence dominates outright.
    bool any_inf = false;
    for (double x : w) any_inf = any_inf || std::isinf(x);
    if (any_inf)
      for (double& x : w) x = std::isinf(x) ? 1.0 : 0.0;
  }
  return normalize(std::move(w));
}

std::vector<double> fuse_rrf(const std::vector<std::vector<int>>& ranks, double k) {
  const std::size_t n = width_of(ranks);
  if (!(k > 0.0)) throw ArgumentError("rrf: k must be > 0");
  std::vector<double> out(n, 0.0);
  for (const auto& row : ranks)
    for (std::size_t c = 0; c < n; ++c)
      if (row[c] > 0) out[c] += 1.0 / (k + row[c]);
  return out;
}

std::vector<double> fuse_borda(const std::vector<std::vector<int>>& ranks,
                               const std::vector<double>& w, std::size_t list_size) {
  const std::size_t n = width_of(ranks);
  check_weights(w, ranks.size());
  std::vector<double> out(n, 0.0);
  for (std::size_t r = 0; r < ranks.size(); ++r)
    for (std::size_t c = 0; c < n; ++c)
      if (ranks[r][c] > 0)
        out[c] += w[r] * (static_cast<double>(list_size) - ranks[r][c] + 1.0);
  return out;
}

std::vector<double> fuse_rra(const std::vector<std::vector<int>>& ranks, std::size_t list_size) {
  const std::size_t n = width_of(ranks);
  if (list_size == 0) throw ArgumentError("rra: list size must be positive");
  const std::size_t m = ranks.size();
  std::vector<double> out(n);
  std::vector<double> p(m);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t r = 0; r < m; ++r)
      p[r] = ranks[r][c] > 0 ? std::min(1.0, ranks[r][c] / static_cast<double>(list_size)) : 1.0;
    std::sort(p.begin(), p.end());
    double best = 1.0;
    for (std::size_t t = 1; t <= m; ++t)
      best = std::min(best, beta_cdf(p[t - 1], static_cast<double>(t), static_cast<double>(m - t + 1)));
    const double s = -std::log(best);
    out[c] = s == 0.0 ? 0.0 : s;
  }
  return out;
}

std::vector<double> fuse_bma(const std::vector<std::vector<double>>& p,
                             const std::vector<double>& priors) {
  const std::size_t n = width_of(p);
  check_weights(priors, p.size());
  std::vector<double> out(n, 0.0);
  for (std::size_t r = 0; r < p.size(); ++r) kernels::axpy(priors[r], p[r], out);
  return normalize(std::move(out));
}

std::vector<double> fuse_rank_centrality(const std::vector<std::vector<double>>& z) {
  const std::size_t n = width_of(z);
  if (n == 0) return {};
  if (n == 1) return {1.0};
  // Transition u -> v is proportional to how strongly retrievers prefer v
  // over u. All rows share one normalizer (the largest out-weight); what is
  // left of each row becomes a self-loop.
  std::vector<double> m(n * n, 0.0);
  double zmax = 0.0;
  for (std::size_t u = 0; u < n; ++u) {
    double row = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      if (u == v) continue;
      double s = 0.0;
      for (const auto& zr : z) s += 1.0 / (1.0 + std::exp(-(zr[v] - zr[u])));
      m[u * n + v] = s;
      row += s;
    }
    zmax = std::max(zmax, row);
  }
  for (std::size_t u = 0; u < n; ++u) {
    double row = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      if (u == v) continue;
      m[u * n + v] /= zmax;
      row += m[u * n + v];
    }
    m[u * n + u] = 1.0 - row;
  }
  // Lazy chain (I + M) / 2: same stationary distribution, never periodic.
  std::vector<double> pi(n, 1.0 / static_cast<double>(n)), next(n);
  double residual = 0.0;
  for (int it = 0; it < 10000; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = 0; v < n; ++v) next[v] += pi[u] * m[u * n + v];
    residual = 0.0;
    double total = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      next[v] = 0.5 * (next[v] + pi[v]);
      residual += std::fabs(next[v] - pi[v]);
      total += next[v];
    }
    for (double& x : next) x /= total;
    pi.swap(next);
    if (residual < 1e-10) return pi;
  }
  throw ConvergenceError("rank_centrality: power iteration did not converge (residual " +
                         std::to_string(residual) + ")");
}

std::vector<double> softmax(const std::vector<double>& x, double tau) {
  if (x.empty()) return {};
  if (!(tau > 0.0)) throw ArgumentError("softmax: tau must be > 0");
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x) mx = std::max(mx, v / tau);
  std::vector<double> out(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += out[i] = std::exp(x[i] / tau - mx);
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> project_simplex(const std::vector<double>& v) {
  if (v.empty()) return {};
  std::vector<double> u(v);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
  return out;
}

double linear_fusion_loss(const std::vector<std::vector<std::vector<double>>>& z,
                          const std::vector<std::vector<double>>& targets,
                          const std::vector<double>& w, double tau) {
  if (z.size() != targets.size()) throw ArgumentError("learn_weights: query count mismatch");
  if (z.empty()) throw ArgumentError("learn_weights: no training queries");
  double total = 0.0;
  for (std::size_t q = 0; q < z.size(); ++q)
    total += cross_entropy_of(targets[q], fuse_linear(z[q], w), tau);
  return total / static_cast<double>(z.size());
}

std::vector<double> learn_weights(const std::vector<std::vector<std::vector<double>>>& z,
                                  const std::vector<std::vector<double>>& targets, double tau,
                                  LearnTrace* trace) {
  if (z.empty()) throw ArgumentError("learn_weights: no training queries");
  if (!(tau > 0.0)) throw ArgumentError("learn_weights: tau must be > 0");
  const std::size_t r = z[0].size();
  if (r == 0) throw ArgumentError("learn_weights: no retrievers");
  for (std::size_t q = 0; q < z.size(); ++q) {
    if (z[q].size() != r) throw ArgumentError("learn_weights: retriever count varies by query");
    if (width_of(z[q]) != targets[q].size())
      throw ArgumentError("learn_weights: target width does not match candidates");
  }
  std::vector<double> w = uniform(r);
  if (r == 1) {
    if (trace) trace->loss = {linear_fusion_loss(z, targets, w, tau)};
    return w;
  }
  double loss = linear_fusion_loss(z, targets, w, tau);
  if (!std::isfinite(loss)) throw EstimatorError("learn_weights: loss is not finite");
  if (trace) trace->loss = {loss};

  std::vector<double> grad(r);
  for (int it = 0; it < 500; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t q = 0; q < z.size(); ++q) {
      const auto p = softmax(fuse_linear(z[q], w), tau);
      for (std::size_t i = 0; i < r; ++i) {
        double g = 0.0;
        for (std::size_t c = 0; c < p.size(); ++c) g += (p[c] - targets[q][c]) * z[q][i][c];
        grad[i] += g / tau;
      }
    }
    for (double& g : grad) g /= static_cast<double>(z.size());

    double step = 0.1;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving, step *= 0.5) {
      std::vector<double> cand(r);
      for (std::size_t i = 0; i < r; ++i) cand[i] = w[i] - step * grad[i];
      cand = project_simplex(cand);
      const double cand_loss = linear_fusion_loss(z, targets, cand, tau);
      if (std::isnan(cand_loss)) throw EstimatorError("learn_weights: loss diverged (NaN)");
      if (cand_loss <= loss) {
        accepted = cand != w;
        w = std::move(cand);
        loss = cand_loss;
        break;
      }
    }
    if (!accepted) break;
    if (trace) trace->loss.push_back(loss);
  }
  return w;
}

// ---- run level --------------------------------------------------------------

QueryView make_view(const std::vector<RetrieverRun>& runs, const std::string& query_id,
                    const std::vector<std::string>& candidates, double epsilon) {
  QueryView v;
  v.query_id = query_id;
  v.candidates = candidates;
  const std::size_t n = candidates.size();
  std::map<std::string, std::size_t> pos;
  for (std::size_t c = 0; c < n; ++c)
    if (!pos.emplace(candidates[c], c).second)
      throw ArgumentError("fusion: duplicate candidate '" + candidates[c] + "'");
  for (const auto& run : runs) {
    std::vector<double> z(n, 0.0);
    std::vector<int> rank(n, 0);
    std::vector<char> present(n, 0);
    if (const RankedList* list = run.find(query_id)) {
      std::vector<std::size_t> idx;
      std::vector<double> scores;
      for (const auto& sc : *list) {
        auto it = pos.find(sc.chunk_id);
        if (it == pos.end()) continue;
        idx.push_back(it->second);
        scores.push_back(sc.score);
      }
      const auto zs = znorm(scores, epsilon);
      // List order is rank order, so position within the filtered list is
      // the rank inside the candidate set.
      for (std::size_t k = 0; k < idx.size(); ++k) {
        z[idx[k]] = zs[k];
        rank[idx[k]] = static_cast<int>(k + 1);
        present[idx[k]] = 1;
      }
    }
    v.z.push_back(std::move(z));
    v.rank.push_back(std::move(rank));
    v.present.push_back(std::move(present));
  }
  return v;
}

std::vector<std::vector<double>> view_probabilities(const QueryView& view,
                                                    const std::vector<double>& temperatures,
                                                    double epsilon) {
  const std::size_t r = view.z.size(), n = view.candidates.size();
  if (!temperatures.empty()) check_weights(temperatures, r);
  std::vector<std::vector<double>> p(r, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < r; ++i) {
    const double tau = temperatures.empty() ? 1.0 : temperatures[i];
    std::vector<double> logits;
    for (std::size_t c = 0; c < n; ++c)
      if (view.present[i][c]) logits.push_back(view.z[i][c]);
    const auto sm = softmax(logits, tau);
    std::size_t k = 0;
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      p[i][c] = view.present[i][c] ? std::max(sm[k++], epsilon) : epsilon;
      total += p[i][c];
    }
    for (double& x : p[i]) x /= total;
  }
  return p;
}

std::vector<double> fuse_query(const QueryView& view, const FusionSpec& spec) {
  const std::size_t r = view.z.size();
  if (r == 0) throw ArgumentError("fusion: no retrievers");
  if (spec.needs_fit())
    throw ConfigError("fusion: method " + method_name(spec.method) + " must be fitted before use");
  if (view.candidates.empty()) return {};
  switch (spec.method) {
    case FusionMethod::ZScoreLinear:
    case FusionMethod::DivergenceWeighted:
    case FusionMethod::LearnedLinear:
      return fuse_linear(view.z, weights_or(spec, r, 0.0));
    case FusionMethod::OpinionPool:
    case FusionMethod::TemperaturePool:
      return fuse_opinion_pool(view_probabilities(view, spec.temperatures, spec.epsilon),
                               weights_or(spec, r, 0.0));
    case FusionMethod::LogitPool:
      return fuse_logit(view_probabilities(view, spec.temperatures, spec.epsilon),
                        weights_or(spec, r, 0.0), spec.epsilon);
    case FusionMethod::NoisyOr:
      return fuse_noisy_or(view_probabilities(view, spec.temperatures, spec.epsilon),
                           weights_or(spec, r, 1.0));
    case FusionMethod::RRF:
      return fuse_rrf(view.rank, spec.rrf_k);
    case FusionMethod::Borda:
      return fuse_borda(view.rank, weights_or(spec, r, 1.0), view.candidates.size());
    case FusionMethod::RRA:
      return fuse_rra(view.rank, view.candidates.size());
    case FusionMethod::BMA:
      return fuse_bma(view_probabilities(view, spec.temperatures, spec.epsilon),
                      weights_or(spec, r, 0.0));
    case FusionMethod::RankCentrality:
      return fuse_rank_centrality(view.z);
  }
  throw ConfigError("fusion: unknown method");
}

FusionSpec fit_fusion(const std::vector<RetrieverRun>& runs, const FusionSpec& spec,
                      const TargetMap& targets, const AnchorMap& train_anchor,
                      const MetricConfig& cfg) {
  spec.validate();
  FusionSpec out = spec;
  if (!spec.needs_fit()) return out;
  if (runs.empty()) throw ArgumentError("fusion: no retrievers");

  std::vector<std::vector<std::vector<double>>> zs;
  std::vector<std::vector<std::vector<double>>> probs;  // TemperaturePool only
  std::vector<std::vector<double>> tgt;
  auto collect = [&] {
    for (const auto& [q, cands] : train_anchor) {
      if (cands.empty()) continue;
      auto t = targets.find(q);
      if (t == targets.end()) throw AlignmentError("fusion: no target for query '" + q + "'");
      const ChunkDistribution restricted = restrict_to(t->second, cands);
      std::vector<double> row;
      for (const auto& e : restricted.entries) row.push_back(e.probability);
      tgt.push_back(std::move(row));
      zs.push_back(make_view(runs, q, cands, spec.epsilon).z);
    }
    if (tgt.empty()) throw ArgumentError("fusion: no training queries to fit on");
  };

  switch (spec.method) {
    case FusionMethod::LearnedLinear:
      collect();
      out.weights = learn_weights(zs, tgt, cfg.tau);
      break;
    case FusionMethod::DivergenceWeighted: {
      std::vector<double> div;
      for (const auto& run : runs) div.push_back(divergence_score(run, targets, train_anchor, cfg));
      out.weights = spec.lambda
                        ? weights_from_divergence(div, DivWeightMode::Exponential, *spec.lambda)
                        : weights_from_divergence(div, DivWeightMode::Inverse, spec.epsilon);
      break;
    }
    case FusionMethod::TemperaturePool: {
      collect();
      static const double grid[] = {0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0};
      out.temperatures.assign(runs.size(), 1.0);
      for (std::size_t i = 0; i < runs.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (double tau : grid) {
          double loss = 0.0;
          for (std::size_t q = 0; q < zs.size(); ++q)
            loss += cross_entropy_of(tgt[q], zs[q][i], tau);
          if (loss < best) {
            best = loss;
            out.temperatures[i] = tau;
          }
        }
      }
      break;
    }
    default:
      break;
  }
  return out;
}

RetrieverRun fuse(const std::vector<RetrieverRun>& runs, const FusionSpec& spec,
                  const AnchorMap& anchor) {
  spec.validate();
  if (runs.empty()) throw ArgumentError("fusion: no retrievers");
  RetrieverRun out;
  out.name = "ensemble:" + method_name(spec.method);
  std::vector<std::pair<std::string, const std::vector<std::string>*>> queries;
  for (const auto& [q, cands] : anchor)
    if (!cands.empty()) queries.emplace_back(q, &cands);
  std::vector<RankedList> lists(queries.size());
  parallel_for(queries.size(), [&](std::size_t i) {
    const auto& [q, cands] = queries[i];
    const QueryView view = make_view(runs, q, *cands, spec.epsilon);
    const auto scores = fuse_query(view, spec);
    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(scores.size());
    for (std::size_t c = 0; c < scores.size(); ++c) {
      if (!std::isfinite(scores[c]))
        throw EstimatorError("fusion: non-finite fused score for query '" + q + "'");
      scored.emplace_back(view.candidates[c], scores[c]);
    }
    lists[i] = make_ranked_list(std::move(scored));
  });
  for (std::size_t i = 0; i < queries.size(); ++i) out.lists.emplace(queries[i].first, std::move(lists[i]));
  return out;
}

}  // namespace ragmi
