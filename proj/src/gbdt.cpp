#include "ragmi/gbdt.hpp"

#include <algorithm>
#include <cmath>

#include "ragmi/error.hpp"

namespace ragmi {

void GbdtParams::validate() const {
  if (trees < 1) throw ConfigError("gbdt: trees must be >= 1");
  if (depth < 1 || depth > 12) throw ConfigError("gbdt: depth must be in [1, 12]");
  if (!(learning_rate > 0.0)) throw ConfigError("gbdt: learning_rate must be > 0");
  if (min_leaf < 1) throw ConfigError("gbdt: min_leaf must be >= 1");
  if (!(l2 >= 0.0)) throw ConfigError("gbdt: l2 must be >= 0");
  if (bins < 2 || bins > 65535) throw ConfigError("gbdt: bins must be in [2, 65535]");
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct HistCell {
  double g = 0.0;
  double h = 0.0;
  std::size_t n = 0;
};

}  // namespace

std::uint16_t Gbdt::bin_of(std::size_t feature, double v) const {
  const auto& e = edges_[feature];
  return static_cast<std::uint16_t>(std::lower_bound(e.begin(), e.end(), v) - e.begin());
}

Gbdt Gbdt::fit(const std::vector<std::vector<double>>& columns, const std::vector<double>& y,
               const std::vector<std::size_t>& rows, const GbdtParams& params, GbdtLoss loss) {
  params.validate();
  if (rows.empty()) throw EstimatorError("gbdt: no training rows");
  const std::size_t nf = columns.size();
  const std::size_t n = rows.size();

  Gbdt model;
  model.edges_.resize(nf);
  std::vector<std::vector<std::uint16_t>> binned(nf, std::vector<std::uint16_t>(n));
  for (std::size_t f = 0; f < nf; ++f) {
    std::vector<double> vals(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = columns[f][rows[i]];
    std::sort(vals.begin(), vals.end());
    auto& edges = model.edges_[f];
    for (int b = 1; b < params.bins; ++b) {
      const double v = vals[(n - 1) * static_cast<std::size_t>(b) / static_cast<std::size_t>(params.bins)];
      if (edges.empty() || v > edges.back()) edges.push_back(v);
    }
    // The top edge would only separate the maximum; dropping it keeps the
    // last bin non-empty.
    if (!edges.empty() && edges.back() >= vals.back()) edges.pop_back();
    for (std::size_t i = 0; i < n; ++i) binned[f][i] = model.bin_of(f, columns[f][rows[i]]);
  }

  double mean_y = 0.0;
  for (std::size_t r : rows) mean_y += y[r];
  mean_y /= static_cast<double>(n);
  if (loss == GbdtLoss::Logistic) {
    const double p = std::clamp(mean_y, 1e-6, 1.0 - 1e-6);
    model.base_ = std::log(p / (1.0 - p));
  } else {
    model.base_ = mean_y;
  }

  std::vector<double> pred(n, model.base_), grad(n), hess(n);
  std::vector<int> node_of(n);
  const double lambda = params.l2;

  for (int t = 0; t < params.trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double target = y[rows[i]];
      if (loss == GbdtLoss::Logistic) {
        const double p = sigmoid(pred[i]);
        grad[i] = p - target;
        hess[i] = std::max(p * (1.0 - p), 1e-12);
      } else {
        grad[i] = pred[i] - target;
        hess[i] = 1.0;
      }
    }

    Tree tree(1);
    std::fill(node_of.begin(), node_of.end(), 0);
    std::vector<int> frontier{0};
    for (int level = 0; level < params.depth && !frontier.empty(); ++level) {
      std::vector<int> slot(tree.size(), -1);
      for (std::size_t s = 0; s < frontier.size(); ++s) slot[frontier[s]] = static_cast<int>(s);
      const std::size_t width = static_cast<std::size_t>(params.bins);
      std::vector<HistCell> hist(frontier.size() * nf * width);
      std::vector<HistCell> totals(frontier.size());
      for (std::size_t i = 0; i < n; ++i) {
        const int s = slot[node_of[i]];
        if (s < 0) continue;
        totals[s].g += grad[i];
        totals[s].h += hess[i];
        ++totals[s].n;
        for (std::size_t f = 0; f < nf; ++f) {
          HistCell& c = hist[(s * nf + f) * width + binned[f][i]];
          c.g += grad[i];
          c.h += hess[i];
          ++c.n;
        }
      }

      std::vector<int> next;
      for (std::size_t s = 0; s < frontier.size(); ++s) {
        const HistCell& tot = totals[s];
        const double parent = tot.g * tot.g / (tot.h + lambda);
        double best_gain = 1e-12;
        int best_f = -1;
        std::uint16_t best_bin = 0;
        for (std::size_t f = 0; f < nf; ++f) {
          HistCell left;
          const std::size_t nb = model.edges_[f].size();
          for (std::size_t b = 0; b < nb; ++b) {
            const HistCell& c = hist[(s * nf + f) * width + b];
            left.g += c.g;
            left.h += c.h;
            left.n += c.n;
            const std::size_t right_n = tot.n - left.n;
            if (left.n < static_cast<std::size_t>(params.min_leaf)) continue;
            if (right_n < static_cast<std::size_t>(params.min_leaf)) break;
            const double rg = tot.g - left.g, rh = tot.h - left.h;
            const double gain =
                left.g * left.g / (left.h + lambda) + rg * rg / (rh + lambda) - parent;
            if (gain > best_gain) {
              best_gain = gain;
              best_f = static_cast<int>(f);
              best_bin = static_cast<std::uint16_t>(b);
            }
          }
        }
        if (best_f < 0) continue;
        const int id = frontier[s];
        tree[id].feature = best_f;
        tree[id].bin = best_bin;
        tree[id].left = static_cast<int>(tree.size());
        tree[id].right = static_cast<int>(tree.size() + 1);
        tree.emplace_back();
        tree.emplace_back();
        next.push_back(tree[id].left);
        next.push_back(tree[id].right);
      }
      if (next.empty()) break;
      for (std::size_t i = 0; i < n; ++i) {
        const Node& nd = tree[node_of[i]];
        if (nd.feature < 0) continue;
        node_of[i] = binned[nd.feature][i] <= nd.bin ? nd.left : nd.right;
      }
      frontier = std::move(next);
    }

    std::vector<double> g(tree.size(), 0.0), h(tree.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      g[node_of[i]] += grad[i];
      h[node_of[i]] += hess[i];
    }
    for (std::size_t id = 0; id < tree.size(); ++id)
      if (tree[id].feature < 0) tree[id].value = -params.learning_rate * g[id] / (h[id] + lambda);
    for (std::size_t i = 0; i < n; ++i) pred[i] += tree[node_of[i]].value;
    model.trees_.push_back(std::move(tree));
  }
  return model;
}

double Gbdt::predict_raw(const std::vector<std::vector<double>>& columns, std::size_t row) const {
  double out = base_;
  for (const Tree& tree : trees_) {
    int id = 0;
    while (tree[id].feature >= 0) {
      const auto f = static_cast<std::size_t>(tree[id].feature);
      id = bin_of(f, columns[f][row]) <= tree[id].bin ? tree[id].left : tree[id].right;
    }
    out += tree[id].value;
  }
  return out;
}

}  // namespace ragmi
